#include "mlg/align/losses.hpp"

#include "mlg/error.hpp"

namespace mlg {

namespace {

using Tape = ad::Tape<double>;

ad::Var leaf(Tape& tape, const Matrix<double>& m) { return tape.constant(m.data, m.rows, m.cols); }

Matrix<double> grab(const Tape& tape, ad::Var v) {
  const auto s = tape.value(v);
  return Matrix<double>(tape.rows(v), tape.cols(v), {s.begin(), s.end()});
}

}  // namespace

Matrix<double> similarity_matrix(const Matrix<double>& v_local, const Matrix<double>& t_local) {
  if (v_local.cols != t_local.cols) throw ValidationError("similarity_matrix: feature dimensions differ");
  Tape tape(false);
  const auto v = tape.l2_normalize_rows(leaf(tape, v_local));
  const auto t = tape.l2_normalize_rows(leaf(tape, t_local));
  return grab(tape, tape.matmul_nt(t, v));
}

std::vector<double> attend(const Matrix<double>& v_local, std::span<const double> s_row, double tau1) {
  if (static_cast<int>(s_row.size()) != v_local.rows) throw ValidationError("attend: row length differs from positions");
  if (!(tau1 > 0)) throw ValidationError("attend: tau1 must be positive");
  Tape tape(false);
  const auto s = tape.constant({s_row.begin(), s_row.end()}, 1, v_local.rows);
  const auto w = tape.softmax_rows(tape.scale(s, 1.0 / tau1));
  return grab(tape, tape.matmul(w, leaf(tape, v_local))).data;
}

double match_score(const Matrix<double>& contexts, const Matrix<double>& t_local, double tau2) {
  if (contexts.rows != t_local.rows || contexts.cols != t_local.cols || contexts.rows < 1)
    throw ValidationError("match_score: shapes differ");
  if (!(tau2 > 0)) throw ValidationError("match_score: tau2 must be positive");
  Tape tape(false);
  const auto c = tape.l2_normalize_rows(leaf(tape, contexts));
  const auto t = tape.l2_normalize_rows(leaf(tape, t_local));
  const int offsets[2] = {0, contexts.rows};
  return tape.scalar(tape.segment_logsumexp(tape.scale(tape.row_dot(c, t), 1.0 / tau2), offsets));
}

double local_contrastive_loss(const std::vector<Matrix<double>>& v_batch, const std::vector<Matrix<double>>& t_batch,
                              double tau1, double tau2, double tau3) {
  const int b = static_cast<int>(v_batch.size());
  if (b < 1 || t_batch.size() != v_batch.size()) throw ValidationError("local loss: batch sizes differ or empty");
  Tape tape(false);
  std::vector<ad::Var> texts;
  std::vector<int> offsets{0};
  for (const auto& t : t_batch) {
    texts.push_back(tape.l2_normalize_rows(leaf(tape, t)));
    offsets.push_back(offsets.back() + t.rows);
  }
  const auto items = tape.concat_rows(texts);
  std::vector<ad::Var> rows;
  for (const auto& v : v_batch) {
    const auto vn = tape.l2_normalize_rows(leaf(tape, v));
    rows.push_back(tape.transpose(local_match_scores<double>(tape, vn, items, offsets, tau1, tau2)));
  }
  return tape.scalar(symmetric_infonce<double>(tape, tape.concat_rows(rows), tau3));
}

double global_contrastive_loss(const Matrix<double>& v_g, const Matrix<double>& t_r, double tau3) {
  if (v_g.rows != t_r.rows || v_g.cols != t_r.cols || v_g.rows < 1) throw ValidationError("global loss: shapes differ");
  Tape tape(false);
  const auto v = tape.l2_normalize_rows(leaf(tape, v_g));
  const auto t = tape.l2_normalize_rows(leaf(tape, t_r));
  return tape.scalar(symmetric_infonce<double>(tape, tape.matmul_nt(v, t), tau3));
}

double contrastive_from_scores(const Matrix<double>& scores, double tau3) {
  if (scores.rows != scores.cols || scores.rows < 1) throw ValidationError("score matrix must be square");
  Tape tape(false);
  return tape.scalar(symmetric_infonce<double>(tape, leaf(tape, scores), tau3));
}

}  // namespace mlg
