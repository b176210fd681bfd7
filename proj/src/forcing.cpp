#include "triodlab/forcing.hpp"

#include <cmath>
#include <fmt/core.h>

namespace triodlab {

namespace {

double param(const std::map<std::string, double>& params, const std::string& key, double fallback) {
  auto it = params.find(key);
  return it == params.end() ? fallback : it->second;
}

}  // namespace

void ForcingField::check() const {
  if (!(p_ >= 2.0) || !(q_ > 2.0)) throw Error(fmt::format("forcing: need p >= 2 and q > 2 (p={}, q={})", p_, q_));
  if (!(zeta() > 0.0)) throw Error(fmt::format("forcing: 1 - 1/p - 2/q must be positive (p={}, q={})", p_, q_));
  if (kind_ == ForcingKind::constant && !is_finite(constant_)) throw Error("forcing: constant is not finite");
  if (kind_ == ForcingKind::preset) {
    if (preset_ != "shear" && preset_ != "radial" && preset_ != "swirl" && preset_ != "pulse") {
      throw Error(fmt::format("forcing: unknown preset '{}'", preset_));
    }
    for (const auto& [k, v] : params_) {
      if (!std::isfinite(v)) throw Error(fmt::format("forcing: parameter '{}' is not finite", k));
    }
  }
}

ForcingField ForcingField::zero(double p, double q) {
  ForcingField f;
  f.p_ = p;
  f.q_ = q;
  f.check();
  return f;
}

ForcingField ForcingField::constant(Point2 value, double p, double q) {
  ForcingField f;
  f.kind_ = ForcingKind::constant;
  f.constant_ = value;
  f.p_ = p;
  f.q_ = q;
  f.check();
  return f;
}

ForcingField ForcingField::preset(std::string name, std::map<std::string, double> params, double p, double q) {
  ForcingField f;
  f.kind_ = ForcingKind::preset;
  f.preset_ = std::move(name);
  f.params_ = std::move(params);
  f.p_ = p;
  f.q_ = q;
  f.check();
  return f;
}

Point2 ForcingField::evaluate_unscaled(const Point2& x, double t) const {
  switch (kind_) {
    case ForcingKind::zero:
      return {};
    case ForcingKind::constant:
      return constant_;
    case ForcingKind::preset: {
      const double c = param(params_, "c", 0.0);
      if (preset_ == "shear") return {c * x.y, 0.0};
      if (preset_ == "radial") return c * x;
      if (preset_ == "swirl") return {-c * x.y, c * x.x};
      return {0.0, c * std::sin(param(params_, "omega", 1.0) * t)};  // pulse
    }
  }
  return {};
}

Point2 ForcingField::operator()(const Point2& x, double t) const {
  if (kind_ == ForcingKind::zero) return {};
  return scale_ * evaluate_unscaled(origin_ + scale_ * x, time0_ + scale_ * scale_ * t);
}

void ForcingField::set_rescaling(Point2 origin, double time0, double scale) {
  if (!(scale > 0.0)) throw Error("forcing: rescale factor must be positive");
  origin_ = origin;
  time0_ = time0;
  scale_ = scale;
}

ForcingField ForcingField::rescaled(const Point2& center, double s, double lambda) const {
  if (!(lambda > 0.0)) throw Error("forcing: rescale factor must be positive");
  // new(x,t) = lambda * old(center + lambda x, s + lambda^2 t)
  //          = lambda*scale * u0(origin + scale*center + scale*lambda x, time0 + scale^2 s + (scale*lambda)^2 t)
  ForcingField out = *this;
  out.origin_ = origin_ + scale_ * center;
  out.time0_ = time0_ + scale_ * scale_ * s;
  out.scale_ = scale_ * lambda;
  return out;
}

}  // namespace triodlab
