#include "data/depth.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace mmgan {

DepthNorm normalize_depth(const Tensor& raw) {
    if (!raw.defined() || raw.numel() == 0)
        throw std::invalid_argument("normalize_depth: empty tensor");
    if (!all_finite(raw))
        throw std::invalid_argument("normalize_depth: non-finite depth");
    DepthNorm out;
    out.dmin = raw.data()[0];
    out.dmax = raw.data()[0];
    for (int64_t i = 0; i < raw.numel(); ++i) {
        out.dmin = std::min(out.dmin, raw.data()[i]);
        out.dmax = std::max(out.dmax, raw.data()[i]);
    }
    out.normalized = Tensor::zeros(raw.shape());
    double range = out.dmax - out.dmin;
    if (range <= 0.0) {
        for (int64_t i = 0; i < raw.numel(); ++i) out.normalized.data()[i] = -1.0;
        return out;
    }
    for (int64_t i = 0; i < raw.numel(); ++i)
        out.normalized.data()[i] = (raw.data()[i] - out.dmin) / range * 2.0 - 1.0;
    return out;
}

Tensor denormalize_depth(const Tensor& normalized, double dmin, double dmax) {
    if (dmax <= dmin)
        throw std::invalid_argument("denormalize_depth: dmax must exceed dmin");
    Tensor out = Tensor::zeros(normalized.shape());
    for (int64_t i = 0; i < normalized.numel(); ++i)
        out.data()[i] = dmin + (normalized.data()[i] + 1.0) * 0.5 * (dmax - dmin);
    return out;
}

Tensor normals_from_depth(const Tensor& depth, double pixel_spacing) {
    std::vector<int64_t> s = depth.shape();
    int64_t B = 1, H = 0, W = 0;
    if (s.size() == 3 && s[0] == 1) {
        H = s[1];
        W = s[2];
    } else if (s.size() == 4 && s[1] == 1) {
        B = s[0];
        H = s[2];
        W = s[3];
    } else {
        throw std::invalid_argument("normals_from_depth: expected [1,H,W] or [B,1,H,W]");
    }
    double h = pixel_spacing > 0.0 ? pixel_spacing : 2.0 / static_cast<double>(W);

    std::vector<int64_t> out_shape = s.size() == 3
        ? std::vector<int64_t>{3, H, W}
        : std::vector<int64_t>{B, 3, H, W};
    Tensor out = Tensor::zeros(out_shape);

    for (int64_t b = 0; b < B; ++b) {
        const double* z = depth.data() + b * H * W;
        double* n = out.data() + b * 3 * H * W;
        for (int64_t y = 0; y < H; ++y)
            for (int64_t x = 0; x < W; ++x) {
                double dzdx, dzdy;
                if (x == 0)
                    dzdx = (z[y * W + 1] - z[y * W]) / h;
                else if (x == W - 1)
                    dzdx = (z[y * W + W - 1] - z[y * W + W - 2]) / h;
                else
                    dzdx = (z[y * W + x + 1] - z[y * W + x - 1]) / (2.0 * h);
                if (y == 0)
                    dzdy = (z[W + x] - z[x]) / h;
                else if (y == H - 1)
                    dzdy = (z[(H - 1) * W + x] - z[(H - 2) * W + x]) / h;
                else
                    dzdy = (z[(y + 1) * W + x] - z[(y - 1) * W + x]) / (2.0 * h);
                double nx = -dzdx, ny = -dzdy, nz = 1.0;
                double len = std::sqrt(nx * nx + ny * ny + nz * nz);
                n[(0 * H + y) * W + x] = nx / len;
                n[(1 * H + y) * W + x] = ny / len;
                n[(2 * H + y) * W + x] = nz / len;
            }
    }
    return out;
}

Tensor depth_from_normals(const Tensor& normals, double pixel_spacing) {
    std::vector<int64_t> s = normals.shape();
    int64_t B = 1, H = 0, W = 0;
    if (s.size() == 3 && s[0] == 3) {
        H = s[1];
        W = s[2];
    } else if (s.size() == 4 && s[1] == 3) {
        B = s[0];
        H = s[2];
        W = s[3];
    } else {
        throw std::invalid_argument("depth_from_normals: expected [3,H,W] or [B,3,H,W]");
    }
    double h = pixel_spacing > 0.0 ? pixel_spacing : 2.0 / static_cast<double>(W);

    std::vector<int64_t> out_shape = s.size() == 3
        ? std::vector<int64_t>{1, H, W}
        : std::vector<int64_t>{B, 1, H, W};
    Tensor out = Tensor::zeros(out_shape);

    std::vector<double> p(static_cast<size_t>(H * W)), q(static_cast<size_t>(H * W));
    std::vector<double> za(static_cast<size_t>(H * W)), zb(static_cast<size_t>(H * W));
    for (int64_t b = 0; b < B; ++b) {
        const double* n = normals.data() + b * 3 * H * W;
        for (int64_t i = 0; i < H * W; ++i) {
            double nz = n[2 * H * W + i];
            double mag = std::abs(nz) < 0.05 ? 0.05 : std::abs(nz);
            nz = nz < 0.0 ? -mag : mag;
            p[static_cast<size_t>(i)] = -n[i] / nz;            // dz/dx
            q[static_cast<size_t>(i)] = -n[H * W + i] / nz;    // dz/dy
        }

        // path A: top row along x, then columns down
        za[0] = 0.0;
        for (int64_t x = 1; x < W; ++x)
            za[static_cast<size_t>(x)] = za[static_cast<size_t>(x - 1)] +
                0.5 * h * (p[static_cast<size_t>(x - 1)] + p[static_cast<size_t>(x)]);
        for (int64_t y = 1; y < H; ++y)
            for (int64_t x = 0; x < W; ++x)
                za[static_cast<size_t>(y * W + x)] = za[static_cast<size_t>((y - 1) * W + x)] +
                    0.5 * h * (q[static_cast<size_t>((y - 1) * W + x)] +
                               q[static_cast<size_t>(y * W + x)]);

        // path B: left column along y, then rows across
        zb[0] = 0.0;
        for (int64_t y = 1; y < H; ++y)
            zb[static_cast<size_t>(y * W)] = zb[static_cast<size_t>((y - 1) * W)] +
                0.5 * h * (q[static_cast<size_t>((y - 1) * W)] + q[static_cast<size_t>(y * W)]);
        for (int64_t y = 0; y < H; ++y)
            for (int64_t x = 1; x < W; ++x)
                zb[static_cast<size_t>(y * W + x)] = zb[static_cast<size_t>(y * W + x - 1)] +
                    0.5 * h * (p[static_cast<size_t>(y * W + x - 1)] +
                               p[static_cast<size_t>(y * W + x)]);

        double* z = out.data() + b * H * W;
        double mean = 0.0;
        for (int64_t i = 0; i < H * W; ++i) {
            z[i] = 0.5 * (za[static_cast<size_t>(i)] + zb[static_cast<size_t>(i)]);
            mean += z[i];
        }
        mean /= static_cast<double>(H * W);
        for (int64_t i = 0; i < H * W; ++i) z[i] -= mean;
    }
    return out;
}

} // namespace mmgan
