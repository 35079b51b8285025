#pragma once

#include "core/tensor.hpp"

namespace mmgan {

struct DepthNorm {
    Tensor normalized;  // same shape, values in [-1, 1]
    double dmin = 0.0;
    double dmax = 0.0;
};

// (d - min)/(max - min) mapped to [-1, 1]. A constant map yields all -1 and
// dmax == dmin in the record.
DepthNorm normalize_depth(const Tensor& raw);

// Inverse of normalize_depth given the recorded range. dmax must exceed dmin.
Tensor denormalize_depth(const Tensor& normalized, double dmin, double dmax);

// Orthographic normals n ~ (-dz/dx, -dz/dy, 1), unit length, from a raw
// depth map [1,H,W] or [B,1,H,W]. Central differences inside, one-sided at
// the border. pixel_spacing <= 0 selects the world convention 2/W (the image
// spans [-1, 1]).
Tensor normals_from_depth(const Tensor& depth, double pixel_spacing = 0.0);

// Approximate inverse of normals_from_depth: integrates the slope field
// implied by a normal map [3,H,W] or [B,3,H,W] into a relative depth map
// (mean 0 per image; the constant of integration is unrecoverable). Averages
// row-first and column-first trapezoid paths. nz is clamped away from zero.
Tensor depth_from_normals(const Tensor& normals, double pixel_spacing = 0.0);

} // namespace mmgan
