#pragma once

// Problem instances shared by the unit suites.

#include "bubbleforge/ansatz.hpp"

namespace fixture {

using namespace bubbleforge;

inline ProblemData disk(int n, double s) {
  return setup_in3(Grid::uniform(Domain::unit_disk(), n), Forcing::zero(), s);
}

/// Disk problem on a grid graded towards the spikes xi, with the ansatz.
struct Resolved {
  ProblemData data;
  Ansatz ansatz;
};

inline Resolved resolved_disk(double s, const std::vector<Point>& xi, int n = 257) {
  auto coarse = disk(65, s);
  auto spec = grading_for(make_configuration(xi, coarse));
  auto data = setup_in3(Grid::graded(Domain::unit_disk(), n, spec), Forcing::zero(), s);
  auto ansatz = assemble_ansatz(make_configuration(xi, data), data);
  return {std::move(data), std::move(ansatz)};
}

}  // namespace fixture
