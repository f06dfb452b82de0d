#include "mlg/vision/resample.hpp"

#include <algorithm>

#include "mlg/error.hpp"

namespace mlg {

namespace {

struct Tap {
  int i0, i1;
  double f;
};

std::vector<Tap> taps(int in, int out) {
  std::vector<Tap> t(out);
  const double scale = static_cast<double>(in) / out;
  for (int o = 0; o < out; ++o) {
    double s = (o + 0.5) * scale - 0.5;
    if (s < 0) s = 0;
    int i0 = static_cast<int>(s);
    if (i0 > in - 1) i0 = in - 1;
    const int i1 = std::min(i0 + 1, in - 1);
    t[o] = {i0, i1, s - i0};
  }
  return t;
}

}  // namespace

template <typename T>
std::vector<T> bilinear_resize(const T* src, int h, int w, int oh, int ow) {
  if (h < 1 || w < 1 || oh < 1 || ow < 1) throw ValidationError("bilinear_resize: empty plane");
  const auto ty = taps(h, oh);
  const auto tx = taps(w, ow);
  std::vector<T> out(std::size_t(oh) * ow);
  for (int y = 0; y < oh; ++y) {
    const T* r0 = src + std::size_t(ty[y].i0) * w;
    const T* r1 = src + std::size_t(ty[y].i1) * w;
    const double fy = ty[y].f;
    for (int x = 0; x < ow; ++x) {
      const double fx = tx[x].f;
      const double top = r0[tx[x].i0] + (r0[tx[x].i1] - r0[tx[x].i0]) * fx;
      const double bot = r1[tx[x].i0] + (r1[tx[x].i1] - r1[tx[x].i0]) * fx;
      out[std::size_t(y) * ow + x] = static_cast<T>(top + (bot - top) * fy);
    }
  }
  return out;
}

template std::vector<float> bilinear_resize(const float*, int, int, int, int);
template std::vector<double> bilinear_resize(const double*, int, int, int, int);

}  // namespace mlg
