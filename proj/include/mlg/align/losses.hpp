#pragma once

#include <span>
#include <vector>

#include "mlg/autodiff.hpp"
#include "mlg/matrix.hpp"

namespace mlg {

// Tape building blocks shared by training and the reference functions below.

// Z(v, t_k) for every text k whose items occupy rows offsets[k]..offsets[k+1]
// of `items`. v_local (N_v × D) and items (ΣN × D) must be L2-normalized rows.
// Returns a (K × 1) var. `eps` floors the context norms (see l2_normalize_rows).
template <typename T>
ad::Var local_match_scores(ad::Tape<T>& tape, ad::Var v_local, ad::Var items, std::span<const int> offsets, T tau1,
                           T tau2, T eps = T(0)) {
  const ad::Var s = tape.matmul_nt(items, v_local);
  const ad::Var attn = tape.softmax_rows(tape.scale(s, T(1) / tau1));
  const ad::Var ctx = tape.matmul(attn, v_local);
  const ad::Var phi = tape.row_dot(tape.l2_normalize_rows(ctx, eps), items);
  return tape.segment_logsumexp(tape.scale(phi, T(1) / tau2), offsets);
}

// Symmetric InfoNCE over a B×B score matrix (row = image, column = text).
template <typename T>
ad::Var symmetric_infonce(ad::Tape<T>& tape, ad::Var scores, T tau3) {
  const int b = tape.rows(scores);
  const ad::Var logits = tape.scale(scores, T(1) / tau3);
  const ad::Var rows = tape.sum(tape.diag(tape.log_softmax_rows(logits)));
  const ad::Var cols = tape.sum(tape.diag(tape.log_softmax_rows(tape.transpose(logits))));
  return tape.scale(tape.add(rows, cols), T(-1) / T(b));
}

// Reference entry points on plain matrices (double precision). Image features
// are position-major: one row per position. All throw ValidationError on
// zero-norm vectors or mismatched dimensions.

// Cosine similarities, N_t × N_v.
Matrix<double> similarity_matrix(const Matrix<double>& v_local, const Matrix<double>& t_local);

// Σ_j softmax_j(s_row / tau1) · v_local[j].
std::vector<double> attend(const Matrix<double>& v_local, std::span<const double> s_row, double tau1);

// log Σ_i exp(cos(c_i, t_i) / tau2), max-shifted.
double match_score(const Matrix<double>& contexts, const Matrix<double>& t_local, double tau2);

// Level loss over a batch: pair (i, k) matches text k's items against image
// i's positions.
double local_contrastive_loss(const std::vector<Matrix<double>>& v_batch, const std::vector<Matrix<double>>& t_batch,
                              double tau1, double tau2, double tau3);

// v_g and t_r are B × D.
double global_contrastive_loss(const Matrix<double>& v_g, const Matrix<double>& t_r, double tau3);

// Symmetric InfoNCE on a precomputed score matrix.
double contrastive_from_scores(const Matrix<double>& scores, double tau3);

}  // namespace mlg
