// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "sinflow/rng.hpp"
#include "sinflow/tape.hpp"
#include "sinflow/tensor.hpp"

namespace sinflow {

// Floor added to softplus so the 1/(2a) coefficients stay bounded.
inline constexpr double kMinCoefficient = 1e-4;

// tanh rounds to +-1.0 in doubles once |raw| exceeds ~19, which would break
// the strict |alpha| < 1 contraction requirement; this factor keeps the
// constrained weight inside the open interval for every finite raw value.
inline constexpr double kAlphaScale = 1.0 - 1e-12;

enum class DLayerKind : std::uint8_t { kSinusoidal, kAffine };
enum class PhaseInit : std::uint8_t { kZero, kRandom };

double softplus_inverse(double y);

/// Tape ids of one layer's constrained parameter views.
struct ConstrainedIds {
  Tape::Id a, b, w, alpha, d;
};

/// Constrained parameter values: a > 0, rows of w sum to 1, |alpha| < 1.
struct ConstrainedValues {
  Tensor a, b, w, alpha, d;  // a, b, w: [dim x embed]; alpha, d: [dim]
};

struct TapeFlow {
  Tape::Id y;       // [batch x dim]
  Tape::Id logdet;  // [batch]
};

struct RawFlow {
  Tensor y;
  Tensor logdet;
};

struct InverseResult {
  Tensor z;
  std::size_t iterations = 0;
  bool converged = false;
};

/// Monotone per-dimension map y = z + g(z) where the residual g integrates a
/// convex sum of squared sinusoidals and is damped by a tanh-constrained
/// residual weight, making it a contraction with Lipschitz constant
/// max_i |alpha_i| < 1.
class SinusoidalLayer {
 public:
  SinusoidalLayer() = default;
  SinusoidalLayer(ParamStore& store, const std::string& prefix, std::size_t dim,
                  std::size_t embed, PhaseInit phase, CounterRng& rng);

  std::size_t dim() const { return dim_; }
  std::size_t embed() const { return embed_; }

  ConstrainedIds constrain(Tape& tape) const;
  ConstrainedValues constrained_values() const;
  /// Writes raw parameters so the constrained views take the given values.
  void set_from_constrained(const ConstrainedValues& cv);

  TapeFlow tape_forward(Tape& tape, Tape::Id z) const;
  RawFlow raw_forward(const Tensor& z) const;
  /// Elementwise 1 + g'(z), always inside (0, 2).
  Tensor raw_derivative(const Tensor& z) const;
  /// Fixed-point inversion: z_{j+1} = y - g(z_j) from z_0 = start (defaults
  /// to y), stopping on the batch-wide infinity norm.
  InverseResult raw_inverse(const Tensor& y, double tol, std::size_t max_iter) const;
  InverseResult raw_inverse_from(const Tensor& y, const Tensor& start, double tol,
                                 std::size_t max_iter) const;

  /// Lipschitz bound of the residual: max_i |alpha_i|.
  double contraction_bound() const;

 private:
  std::size_t dim_ = 0;
  std::size_t embed_ = 0;
  Parameter* a_raw_ = nullptr;
  Parameter* b_ = nullptr;
  Parameter* w_raw_ = nullptr;
  Parameter* alpha_raw_ = nullptr;
  Parameter* d_ = nullptr;
};

/// Trainable per-dimension scale and shift, y = exp(s) * z + d. Stands in for
/// a sinusoidal layer with the residual weight forced to zero; used as the
/// affine-only baseline.
class AffineLayer {
 public:
  AffineLayer() = default;
  AffineLayer(ParamStore& store, const std::string& prefix, std::size_t dim);

  std::size_t dim() const { return dim_; }

  TapeFlow tape_forward(Tape& tape, Tape::Id z) const;
  RawFlow raw_forward(const Tensor& z) const;
  Tensor raw_derivative(const Tensor& z) const;
  InverseResult raw_inverse(const Tensor& y, double tol, std::size_t max_iter) const;

 private:
  std::size_t dim_ = 0;
  Parameter* log_scale_ = nullptr;
  Parameter* shift_ = nullptr;
};

using DLayer = std::variant<SinusoidalLayer, AffineLayer>;

TapeFlow d_layer_tape_forward(const DLayer& layer, Tape& tape, Tape::Id z);
RawFlow d_layer_raw_forward(const DLayer& layer, const Tensor& z);
InverseResult d_layer_raw_inverse(const DLayer& layer, const Tensor& y, double tol,
                                  std::size_t max_iter);

}  // namespace sinflow
