#pragma once

#include <vector>

#include "mlg/autodiff.hpp"
#include "mlg/matrix.hpp"
#include "mlg/rng.hpp"
#include "mlg/vision/backbone.hpp"

namespace mlg {

// Projected image features, one row per grid position (row-major grid order):
// v_s is M × D, v_d is M/4 × D, v_g has D entries.
template <typename T>
struct ImagePyramid {
  Matrix<T> v_s;
  Matrix<T> v_d;
  std::vector<T> v_g;
  int grid = 0;
};

struct PyramidVars {
  ad::Var v_s, v_d, v_g;  // (M×D), (M/4×D), (1×D)
};

// Per-position affine heads for the shallow and deep maps and an affine head
// for the pooled vector.
template <typename T>
class ProjectionHeads {
 public:
  ProjectionHeads() = default;
  ProjectionHeads(int shallow_channels, int deep_channels, int dim);

  void init(Engine& rng);

  int dim() const { return dim_; }
  std::vector<ad::Parameter<T>>& params() { return params_; }
  const std::vector<ad::Parameter<T>>& params() const { return params_; }

  PyramidVars forward(ad::Tape<T>& tape, const BackboneVars& feats, int slot_base) const;

  enum Index { kShallowW, kShallowB, kDeepW, kDeepB, kGlobalW, kGlobalB };

 private:
  int cs_ = 0, cd_ = 0, dim_ = 0;
  std::vector<ad::Parameter<T>> params_;
};

// Throws ValidationError when the head shapes do not match the features.
template <typename T>
ImagePyramid<T> project(const BackboneFeatures<T>& feats, const ProjectionHeads<T>& heads);

extern template class ProjectionHeads<float>;
extern template class ProjectionHeads<double>;

}  // namespace mlg
