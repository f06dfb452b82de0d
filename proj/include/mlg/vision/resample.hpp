#pragma once

#include <vector>

namespace mlg {

// Bilinear resize of a single h×w plane to oh×ow using the half-pixel
// (align_corners = false) convention: output pixel (y, x) samples source
// coordinate ((y + 0.5)·h/oh − 0.5, (x + 0.5)·w/ow − 0.5), clamped to the edge.
template <typename T>
std::vector<T> bilinear_resize(const T* src, int h, int w, int oh, int ow);

extern template std::vector<float> bilinear_resize(const float*, int, int, int, int);
extern template std::vector<double> bilinear_resize(const double*, int, int, int, int);

}  // namespace mlg
