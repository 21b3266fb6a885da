#pragma once

#include <stdexcept>
#include <string>

namespace gardner {

// Iterative solver gave up; message carries the diagnostics.
class non_convergence : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Free-energy minimizer ran into the q -> 1 boundary with the value below the
// divergence floor (the above-capacity regime).
class diverging_minimum : public std::runtime_error {
 public:
  diverging_minimum(double q_boundary, double value)
      : std::runtime_error("free-energy minimum diverges: q=" + std::to_string(q_boundary) +
                           " value=" + std::to_string(value)),
        q_boundary(q_boundary),
        value(value) {}
  double q_boundary;
  double value;
};

}  // namespace gardner
