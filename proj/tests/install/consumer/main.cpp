#include <cmath>
#include <cstdio>

#include "bubbleforge/elliptic.hpp"

int main() {
  using namespace bubbleforge;
  auto ep = principal_eigenpair(*assemble_laplacian(Grid::uniform(Domain::unit_disk(), 33)));
  std::printf("lambda1 %.6f\n", ep.lambda);
  return std::abs(ep.lambda - 5.783) < 0.1 ? 0 : 1;
}
