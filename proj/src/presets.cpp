#include "gradflow/presets.hpp"

namespace gradflow {

namespace {

Matrix rows4(std::initializer_list<std::initializer_list<double>> rows) {
  Matrix m(4, 4);
  Eigen::Index i = 0;
  for (const auto& row : rows) {
    Eigen::Index j = 0;
    for (double v : row) m(i, j++) = v;
    ++i;
  }
  return m;
}

}  // namespace

BenchmarkCase benchmark_case() {
  // Source data run the last two entries of the third row together;
  // 0.3043 is the (3,4) element.
  const Matrix a = rows4({{-2.7527, -0.6944, -2.8952, -0.7989},
                          {1.2008, -4.3397, -1.7097, -0.6025},
                          {-0.2198, -1.0665, -5.1494, 0.3043},
                          {-2.8886, 1.922, 2.7361, -3.8897}});
  const Matrix eye = Matrix::Identity(4, 4);

  QuadraticCost phi;
  phi.curvature = rows4({{6.095, 0.6234, 0.1468, -0.9387},
                         {0.6234, 6.4595, -1.0145, 1.0203},
                         {0.1468, -1.0145, 7.0719, 0.7042},
                         {-0.9387, 1.0203, 0.7042, 4.5038}});
  phi.linear = Vector(4);
  phi.linear << 0.0201, 1.4908, 1.2373, 1.8092;
  phi.offset = -0.1504;

  const Matrix q = rows4({{3.994, -1.1602, -0.1978, -0.9408},
                          {-1.1602, 4.0145, -0.3114, -0.8189},
                          {-0.1978, -0.3114, 5.9914, -1.8039},
                          {-0.9408, -0.8189, -1.8039, 5.3419}});
  const Matrix p = rows4({{1.3220, 0.3400, -0.3819, -0.9667},
                          {0.3400, 0.7413, -0.3188, -0.4261},
                          {-0.3819, -0.3188, 0.6745, 0.1771},
                          {-0.9667, -0.4261, 0.1771, 1.3186}});

  return {PlantModel(a, eye, eye, eye, eye), phi, q, p};
}

Vector tracking_cost_coefficients(const Vector& target) {
  QuadraticCost psi;
  psi.curvature = Matrix::Identity(target.size(), target.size());
  psi.linear = -target;
  psi.offset = 0.5 * target.squaredNorm();
  return pack_quadratic(psi);
}

}  // namespace gradflow
