#include "plot/plot.hpp"

#include "data/image_io.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace mmgan {

namespace {

std::vector<std::string> split_row(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::stringstream ss(line);
    while (std::getline(ss, cell, ',')) out.push_back(cell);
    if (!line.empty() && line.back() == ',') out.push_back("");
    return out;
}

struct Canvas {
    int64_t w, h;
    std::vector<uint8_t> px;
    Canvas(int64_t w, int64_t h) : w(w), h(h), px(static_cast<size_t>(w * h * 3), 255) {}

    void set(int64_t x, int64_t y, uint8_t r, uint8_t g, uint8_t b) {
        if (x < 0 || y < 0 || x >= w || y >= h) return;
        size_t i = static_cast<size_t>((y * w + x) * 3);
        px[i] = r;
        px[i + 1] = g;
        px[i + 2] = b;
    }

    void line(double x0, double y0, double x1, double y1,
              uint8_t r, uint8_t g, uint8_t b) {
        double dx = x1 - x0, dy = y1 - y0;
        int64_t steps = static_cast<int64_t>(std::max(std::abs(dx), std::abs(dy))) + 1;
        for (int64_t i = 0; i <= steps; ++i) {
            double t = static_cast<double>(i) / static_cast<double>(steps);
            set(static_cast<int64_t>(std::lround(x0 + t * dx)),
                static_cast<int64_t>(std::lround(y0 + t * dy)), r, g, b);
        }
    }
};

const uint8_t kPalette[8][3] = {
    {204, 37, 41},  {57, 106, 177}, {62, 150, 81},   {218, 124, 48},
    {107, 76, 154}, {146, 36, 40},  {148, 139, 61},  {83, 81, 84},
};

} // namespace

std::vector<Series> read_metrics_csv(const std::string& path, const std::string& x_column) {
    std::ifstream in(path);
    if (!in) throw IOError("plot: cannot open '" + path + "'");
    std::string line;
    if (!std::getline(in, line)) throw IOError("plot: '" + path + "' is empty");
    std::vector<std::string> header = split_row(line);
    size_t xcol = header.size();
    for (size_t i = 0; i < header.size(); ++i)
        if (header[i] == x_column) xcol = i;
    if (xcol == header.size())
        throw IOError("plot: '" + path + "' has no '" + x_column + "' column");

    std::vector<Series> series(header.size());
    for (size_t i = 0; i < header.size(); ++i) series[i].name = header[i];

    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> cells = split_row(line);
        if (cells.size() != header.size() || cells[xcol].empty()) continue;
        double x = std::stod(cells[xcol]);
        for (size_t i = 0; i < cells.size(); ++i) {
            if (i == xcol || cells[i].empty()) continue;
            series[i].x.push_back(x);
            series[i].y.push_back(std::stod(cells[i]));
        }
    }
    series.erase(series.begin() + static_cast<std::ptrdiff_t>(xcol));
    return series;
}

void render_chart(const std::vector<Series>& series, int64_t width, int64_t height,
                  const std::string& path) {
    if (width < 64 || height < 64)
        throw std::invalid_argument("render_chart: canvas too small");
    double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin;
    double ymin = xmin, ymax = -xmin;
    size_t points = 0;
    for (const auto& s : series)
        for (size_t i = 0; i < s.x.size(); ++i) {
            xmin = std::min(xmin, s.x[i]);
            xmax = std::max(xmax, s.x[i]);
            ymin = std::min(ymin, s.y[i]);
            ymax = std::max(ymax, s.y[i]);
            ++points;
        }
    if (points == 0) throw std::invalid_argument("render_chart: no data points");
    if (xmax <= xmin) xmax = xmin + 1.0;
    if (ymax <= ymin) ymax = ymin + 1.0;

    const int64_t margin = 24;
    Canvas cv(width, height);
    auto px = [&](double x) {
        return margin + (x - xmin) / (xmax - xmin) * static_cast<double>(width - 2 * margin);
    };
    auto py = [&](double y) {
        return static_cast<double>(height - margin) -
               (y - ymin) / (ymax - ymin) * static_cast<double>(height - 2 * margin);
    };

    // frame and quarter gridlines
    cv.line(margin, margin, margin, height - margin, 0, 0, 0);
    cv.line(margin, height - margin, width - margin, height - margin, 0, 0, 0);
    for (int g = 1; g < 4; ++g) {
        int64_t gy = margin + g * (height - 2 * margin) / 4;
        int64_t gx = margin + g * (width - 2 * margin) / 4;
        cv.line(margin, gy, width - margin, gy, 220, 220, 220);
        cv.line(gx, margin, gx, height - margin, 220, 220, 220);
    }

    for (size_t s = 0; s < series.size(); ++s) {
        const auto& col = kPalette[s % 8];
        const auto& ser = series[s];
        for (size_t i = 0; i + 1 < ser.x.size(); ++i)
            cv.line(px(ser.x[i]), py(ser.y[i]), px(ser.x[i + 1]), py(ser.y[i + 1]),
                    col[0], col[1], col[2]);
        if (ser.x.size() == 1)
            cv.set(static_cast<int64_t>(px(ser.x[0])),
                   static_cast<int64_t>(py(ser.y[0])), col[0], col[1], col[2]);
        // color key swatch in the top-left margin
        for (int64_t k = 0; k < 10; ++k)
            cv.set(margin + 4 + k, margin + 4 + static_cast<int64_t>(s) * 4,
                   col[0], col[1], col[2]);
    }
    write_png_rgb8(path, width, height, cv.px);
}

std::vector<std::string> plot_metrics(const std::string& csv_path,
                                      const std::string& out_dir) {
    std::vector<Series> all = read_metrics_csv(csv_path);
    std::filesystem::create_directories(out_dir);

    auto pick = [&](const std::vector<std::string>& names) {
        std::vector<Series> out;
        for (const auto& s : all)
            for (const auto& n : names)
                if ((n.back() == '*' && s.name.rfind(n.substr(0, n.size() - 1), 0) == 0) ||
                    s.name == n)
                    out.push_back(s);
        return out;
    };

    std::vector<std::string> written;
    auto emit = [&](const std::string& file, const std::vector<std::string>& names) {
        std::vector<Series> sel = pick(names);
        size_t points = 0;
        for (const auto& s : sel) points += s.x.size();
        if (points == 0) return;
        std::string path = out_dir + "/" + file;
        render_chart(sel, 640, 400, path);
        written.push_back(path);
    };
    emit("losses.png", {"d_loss", "g_loss", "r1"});
    emit("augment.png", {"p", "blur_sigma", "overfit_estimate"});
    emit("fid.png", {"fid_*"});
    emit("consistency.png", {"sie", "normal_mean_deg", "normal_median_deg"});
    if (written.empty())
        throw IOError("plot: '" + csv_path + "' yielded no plottable columns");
    return written;
}

} // namespace mmgan
