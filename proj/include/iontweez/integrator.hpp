#pragma once

#include <cmath>
#include <vector>

#include "iontweez/errors.hpp"

namespace iontweez {

/// Symmetric composition of the drift-kick-drift leapfrog. Every substep is a
/// shear in phase space, so for symmetric force Jacobians the one-step map is
/// exactly symplectic and time-reversible; the weights set the order.
struct Composition {
  std::vector<double> weights;
  int order = 2;

  static Composition leapfrog() { return {{1.0}, 2}; }

  /// Triple-jump fourth-order scheme.
  static Composition fourth_order() {
    const double cbrt2 = std::cbrt(2.0);
    const double w1 = 1.0 / (2.0 - cbrt2);
    const double w0 = -cbrt2 / (2.0 - cbrt2);
    return {{w1, w0, w1}, 4};
  }

  /// Sixth-order scheme built by applying the triple jump to the fourth-order one.
  static Composition sixth_order() {
    const double p = std::pow(2.0, 1.0 / 5.0);
    const double w1 = 1.0 / (2.0 - p);
    const double w0 = -p / (2.0 - p);
    const Composition inner = fourth_order();
    Composition c;
    c.order = 6;
    for (double outer : {w1, w0, w1}) {
      for (double w : inner.weights) c.weights.push_back(outer * w);
    }
    return c;
  }

  static Composition of_order(int order) {
    switch (order) {
      case 2:
        return leapfrog();
      case 4:
        return fourth_order();
      case 6:
        return sixth_order();
      default:
        throw ConfigError("integrator: order must be 2, 4 or 6");
    }
  }

  int stages() const { return static_cast<int>(weights.size()); }
};

/// Advance (position, velocity, time) by one composed step of size h.
///   drift(dt):            position += dt * velocity, time += dt
///   kick(time, dt):       velocity update over dt at the current position
template <class Drift, class Kick>
void composed_step(const Composition& scheme, double h, double& time, Drift&& drift, Kick&& kick) {
  for (double w : scheme.weights) {
    const double half = 0.5 * w * h;
    drift(half);
    time += half;
    kick(time, w * h);
    drift(half);
    time += half;
  }
}

}  // namespace iontweez
