#pragma once

// Matrix exponential by scaling and squaring with a [13/13] Pade kernel
// (Higham, SIAM J. Matrix Anal. Appl. 26 (2005)).

#include <cmath>

#include <Eigen/Dense>

#include "qfb/errors.hpp"

namespace qfb {

template <typename Derived>
typename Derived::PlainObject expm(const Eigen::MatrixBase<Derived>& a_in) {
    using Mat = typename Derived::PlainObject;
    using Scalar = typename Derived::Scalar;

    static constexpr double b[] = {64764752532480000.0, 32382376266240000.0, 7771770303897600.0,
                                   1187353796428800.0,  129060195264000.0,   10559470521600.0,
                                   670442572800.0,      33522128640.0,       1323241920.0,
                                   40840800.0,          960960.0,            16380.0,
                                   182.0,               1.0};
    constexpr double theta13 = 5.371920351148152;

    if (!a_in.allFinite()) throw SolverError("expm: non-finite input");

    Mat a = a_in;
    const double norm1 = a.cwiseAbs().colwise().sum().maxCoeff();
    int squarings = 0;
    if (norm1 > theta13) {
        squarings = static_cast<int>(std::ceil(std::log2(norm1 / theta13)));
        a /= std::ldexp(1.0, squarings);
    }

    const Mat id = Mat::Identity(a.rows(), a.cols());
    const Mat a2 = a * a;
    const Mat a4 = a2 * a2;
    const Mat a6 = a4 * a2;
    const Mat u_inner = a6 * (Scalar(b[13]) * a6 + Scalar(b[11]) * a4 + Scalar(b[9]) * a2) +
                        Scalar(b[7]) * a6 + Scalar(b[5]) * a4 + Scalar(b[3]) * a2 +
                        Scalar(b[1]) * id;
    const Mat u = a * u_inner;
    const Mat v = a6 * (Scalar(b[12]) * a6 + Scalar(b[10]) * a4 + Scalar(b[8]) * a2) +
                  Scalar(b[6]) * a6 + Scalar(b[4]) * a4 + Scalar(b[2]) * a2 + Scalar(b[0]) * id;

    Mat r = (v - u).partialPivLu().solve(v + u);
    for (int k = 0; k < squarings; ++k) r = (r * r).eval();
    if (!r.allFinite()) throw SolverError("expm: overflow");
    return r;
}

} // namespace qfb
