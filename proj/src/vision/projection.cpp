#include "mlg/vision/projection.hpp"

#include <cmath>

#include "mlg/error.hpp"

namespace mlg {

template <typename T>
ProjectionHeads<T>::ProjectionHeads(int shallow_channels, int deep_channels, int dim)
    : cs_(shallow_channels), cd_(deep_channels), dim_(dim) {
  if (cs_ < 1 || cd_ < 1 || dim < 1) throw ValidationError("invalid projection head shape");
  params_.emplace_back("proj.shallow.weight", cs_, dim);
  params_.emplace_back("proj.shallow.bias", 1, dim);
  params_.emplace_back("proj.deep.weight", cd_, dim);
  params_.emplace_back("proj.deep.bias", 1, dim);
  params_.emplace_back("proj.global.weight", cd_, dim);
  params_.emplace_back("proj.global.bias", 1, dim);
}

template <typename T>
void ProjectionHeads<T>::init(Engine& rng) {
  for (int i : {kShallowW, kDeepW, kGlobalW}) {
    auto& p = params_[i];
    const double s = 1.0 / std::sqrt(static_cast<double>(p.rows));
    for (auto& v : p.value) v = static_cast<T>(s * standard_normal(rng));
  }
  for (int i : {kShallowB, kDeepB, kGlobalB})
    for (auto& v : params_[i].value) v = T(0);
}

template <typename T>
PyramidVars ProjectionHeads<T>::forward(ad::Tape<T>& tape, const BackboneVars& f, int slot_base) const {
  if (tape.rows(f.shallow) != cs_ || tape.rows(f.deep) != cd_ || tape.rows(f.pooled) != cd_)
    throw ValidationError("projection heads do not match backbone channels");
  auto p = [&](int i) { return tape.param(params_[i], slot_base + i); };
  PyramidVars out;
  out.v_s = tape.add_row_bias(tape.matmul_tn(f.shallow, p(kShallowW)), p(kShallowB));
  out.v_d = tape.add_row_bias(tape.matmul_tn(f.deep, p(kDeepW)), p(kDeepB));
  out.v_g = tape.add_row_bias(tape.matmul_tn(f.pooled, p(kGlobalW)), p(kGlobalB));
  return out;
}

template <typename T>
ImagePyramid<T> project(const BackboneFeatures<T>& feats, const ProjectionHeads<T>& heads) {
  ad::Tape<T> tape(false);
  BackboneVars v;
  v.shallow = tape.constant(feats.shallow.data, feats.shallow.rows, feats.shallow.cols);
  v.deep = tape.constant(feats.deep.data, feats.deep.rows, feats.deep.cols);
  v.pooled = tape.constant(feats.pooled, static_cast<int>(feats.pooled.size()), 1);
  const auto out = heads.forward(tape, v, 0);
  auto grab = [&](ad::Var var) {
    const auto s = tape.value(var);
    return Matrix<T>(tape.rows(var), tape.cols(var), {s.begin(), s.end()});
  };
  ImagePyramid<T> pyr;
  pyr.v_s = grab(out.v_s);
  pyr.v_d = grab(out.v_d);
  const auto g = tape.value(out.v_g);
  pyr.v_g.assign(g.begin(), g.end());
  pyr.grid = feats.grid;
  return pyr;
}

template class ProjectionHeads<float>;
template class ProjectionHeads<double>;
template ImagePyramid<float> project(const BackboneFeatures<float>&, const ProjectionHeads<float>&);
template ImagePyramid<double> project(const BackboneFeatures<double>&, const ProjectionHeads<double>&);

}  // namespace mlg
