#include <cstdio>
#include <vector>
#include "epsmax/eps_softmax.hpp"
int main() {
  std::vector<double> h{1, 0, 0};
  std::printf("%.6f\n", epsmax::eps_softmax(h, {10.0})[0]);
}
