#pragma once

// Ambient forcing vector field u(x, t) entering the motion law v = h + u_perp.

#include <map>
#include <string>

#include "triodlab/netgeom.hpp"

namespace triodlab {

enum class ForcingKind { zero, constant, preset };

/// Forcing descriptor with integrability exponents p, q.
///
/// Presets (params in braces):
///   shear     u = (c*y, 0)                {c}
///   radial    u = c*x                     {c}
///   swirl     u = c*(-y, x)               {c}
///   pulse     u = (0, c*sin(omega*t))     {c, omega}
///
/// A parabolic rescaling about (y, s) by lambda is carried as an affine map
/// so that the rescaled field is lambda * u(y + lambda*x, s + lambda^2*t).
class ForcingField {
 public:
  ForcingField() = default;

  static ForcingField zero(double p = 2.0, double q = 8.0);
  static ForcingField constant(Point2 value, double p = 2.0, double q = 8.0);
  static ForcingField preset(std::string name, std::map<std::string, double> params, double p = 2.0,
                             double q = 8.0);

  ForcingKind kind() const { return kind_; }
  const Point2& constant_value() const { return constant_; }
  const std::string& preset_name() const { return preset_; }
  const std::map<std::string, double>& params() const { return params_; }
  double p() const { return p_; }
  double q() const { return q_; }
  /// 1 - 1/p - 2/q.
  double zeta() const { return 1.0 - 1.0 / p_ - 2.0 / q_; }

  bool is_zero() const { return kind_ == ForcingKind::zero; }

  Point2 operator()(const Point2& x, double t) const;

  /// Field seen by the flow rescaled about (center, s) by lambda.
  ForcingField rescaled(const Point2& center, double s, double lambda) const;

  // Accumulated rescaling: evaluation is scale * u0(origin + scale*x, time0 + scale^2*t).
  double rescale_factor() const { return scale_; }
  const Point2& rescale_origin() const { return origin_; }
  double rescale_time() const { return time0_; }
  void set_rescaling(Point2 origin, double time0, double scale);

 private:
  Point2 evaluate_unscaled(const Point2& x, double t) const;
  void check() const;

  ForcingKind kind_ = ForcingKind::zero;
  Point2 constant_{};
  std::string preset_;
  std::map<std::string, double> params_;
  double p_ = 2.0;
  double q_ = 8.0;
  Point2 origin_{};
  double time0_ = 0.0;
  double scale_ = 1.0;
};

}  // namespace triodlab
