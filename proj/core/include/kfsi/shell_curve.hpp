#pragma once

#include <memory>

#include "kfsi/types.hpp"

namespace kfsi {

/// Arclength-parametrized boundary curve carrying the shell surface M.
///
/// Conventions: e1 = dc/dq is the unit tangent, nu the unit outer normal,
/// and the Weingarten scalar W is defined by d(nu)/dq = W e1 (so e1' = -W nu).
/// Curvature data is exposed per point; the channel default is flat (W = 0).
class ShellCurve {
 public:
  virtual ~ShellCurve() = default;

  virtual double length() const = 0;
  virtual Vec2 point(double q) const = 0;
  virtual Vec2 tangent(double q) const = 0;
  virtual Vec2 normal(double q) const = 0;
  virtual double weingarten(double q) const = 0;
  virtual double weingarten_d1(double /*q*/) const { return 0.0; }

  // Derived curvature data for the 2D instantiation (M is a curve):
  // 2H = tr(shape operator) with S = -d(nu), so H = -W/2; the second-order
  // gamma coefficient G vanishes (one tangent direction only).
  double mean_curvature(double q) const { return -0.5 * weingarten(q); }
  double gauss_curvature(double) const { return 0.0; }
  double first_form(double) const { return 1.0; }  // arclength parametrization
  double second_form(double q) const { return weingarten(q); }
  double k_contraction(double q) const {
    const double w = weingarten(q);
    return w * w;  // k = W . h
  }

  struct TubeCoords {
    double q;
    double s;
  };

  /// Inverse of Lambda(q, s) = c(q) + s nu(q) by Newton iteration on
  /// (x - c(q)) . e1(q) = 0; throws OutOfTubeError for |s| > kappa or when
  /// the foot point leaves [0, length].
  TubeCoords tube_coords(const Vec2& x, double kappa) const;

 protected:
  virtual double initial_guess(const Vec2& x) const;
};

/// Flat top edge of the channel: c(q) = (q, height), nu = (0, 1).
class FlatTopEdge final : public ShellCurve {
 public:
  FlatTopEdge(double length, double height) : length_(length), height_(height) {}
  double length() const override { return length_; }
  Vec2 point(double q) const override { return {q, height_}; }
  Vec2 tangent(double) const override { return {1.0, 0.0}; }
  Vec2 normal(double) const override { return {0.0, 1.0}; }
  double weingarten(double) const override { return 0.0; }

 protected:
  double initial_guess(const Vec2& x) const override { return x[0]; }

 private:
  double length_;
  double height_;
};

/// Circle arc of radius R around `center`; `nu_inward` selects the normal
/// pointing at the center (W = -1/R) or away from it (W = +1/R).
class CircleArc final : public ShellCurve {
 public:
  CircleArc(Vec2 center, double radius, double theta0, double arc_length, bool nu_inward);

  double length() const override { return length_; }
  Vec2 point(double q) const override;
  Vec2 tangent(double q) const override;
  Vec2 normal(double q) const override;
  double weingarten(double) const override { return nu_inward_ ? -1.0 / radius_ : 1.0 / radius_; }

 protected:
  double initial_guess(const Vec2& x) const override;

 private:
  double theta(double q) const { return theta0_ + q / radius_; }

  Vec2 center_;
  double radius_;
  double theta0_;
  double length_;
  bool nu_inward_;
};

}  // namespace kfsi
