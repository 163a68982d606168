#pragma once

// Self-adjoint boundary-condition pairs (C, D) for
//   C (f'(a), -f'(b))^T = D (f(a), f(b))^T
// and their canonicalization into the five families:
//   FullRank          C = I, D = B = B*          (separated iff b12 = 0)
//   Dirichlet         f(a) = f(b) = 0
//   LeftDirichletRobin f(a) = 0, f'(b) + d f(b) = 0
//   RobinRightDirichlet f'(a) - d f(a) = 0, f(b) = 0
//   Coupled           c f(a) = f(b), f'(a) - conj(c) f'(b) = d f(a)

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <complex>
#include <optional>
#include <stdexcept>
#include <string>

namespace rbp {

using Mat2 = Eigen::Matrix2cd;
using Mat24 = Eigen::Matrix<std::complex<double>, 2, 4>;
using Cplx = std::complex<double>;

struct BcError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct BCMatrices {
    Mat2 C, D;
};

inline constexpr double kBcTol = 1e-10;

struct BcViolation {
    bool ok = false;
    std::string description;
    double symmetry_residual = 0.0;
};

inline Mat24 stacked(const BCMatrices& bc) {
    Mat24 A;
    A.block<2, 2>(0, 0) = bc.C;
    A.block<2, 2>(0, 2) = bc.D;
    return A;
}

// rank(C|D) = 2 and C D* = D C*, both with tolerance 1e-10 on singular values.
inline BcViolation validate_bc(const BCMatrices& bc) {
    BcViolation v;
    if (!bc.C.allFinite() || !bc.D.allFinite()) {
        v.description = "non-finite matrix entries";
        return v;
    }
    Mat24 A = stacked(bc);
    Eigen::JacobiSVD<Mat24> svd(A);
    double s0 = svd.singularValues()(0);
    double s1 = svd.singularValues()(1);
    if (s0 == 0.0 || s1 <= kBcTol * s0) {
        v.description = "rank(C|D) < 2";
        return v;
    }
    Mat2 R = bc.C * bc.D.adjoint() - bc.D * bc.C.adjoint();
    v.symmetry_residual = R.norm();
    if (v.symmetry_residual > kBcTol * A.norm()) {
        v.description = "CD* != DC* (residual " + std::to_string(v.symmetry_residual) + ")";
        return v;
    }
    v.ok = true;
    return v;
}

enum class BcFamily { FullRank, Dirichlet, LeftDirichletRobin, RobinRightDirichlet, Coupled };

inline const char* to_cstr(BcFamily f) {
    switch (f) {
        case BcFamily::FullRank: return "FullRank";
        case BcFamily::Dirichlet: return "Dirichlet";
        case BcFamily::LeftDirichletRobin: return "LeftDirichletRobin";
        case BcFamily::RobinRightDirichlet: return "RobinRightDirichlet";
        case BcFamily::Coupled: return "Coupled";
    }
    return "?";
}

struct CanonicalBC {
    BcFamily family = BcFamily::Dirichlet;
    Mat2 B = Mat2::Zero();  // FullRank: Hermitian matrix
    double d = 0.0;         // Robin parameter / Coupled d
    Cplx c = 0.0;           // Coupled parameter, c != 0
    bool separated = false;
    bool unit_modulus_c = false;  // Coupled with | |c| - 1 | <= tol; boundary-sensitive
    Mat2 transform = Mat2::Identity();  // M with (M C, M D) = canonical pair
    BCMatrices canonical_pair;
};

// Canonical matrices per family.
inline BCMatrices canonical_matrices(const CanonicalBC& cb) {
    BCMatrices out;
    switch (cb.family) {
        case BcFamily::FullRank:
            out.C = Mat2::Identity();
            out.D = cb.B;
            break;
        case BcFamily::Dirichlet:
            out.C = Mat2::Zero();
            out.D = Mat2::Identity();
            break;
        case BcFamily::LeftDirichletRobin:
            out.C << 0, 1, 0, 0;
            out.D << 0, cb.d, 1, 0;
            break;
        case BcFamily::RobinRightDirichlet:
            out.C << 1, 0, 0, 0;
            out.D << cb.d, 0, 0, 1;
            break;
        case BcFamily::Coupled:
            out.C << 1, std::conj(cb.c), 0, 0;
            out.D << cb.d, 0, -cb.c, 1;
            break;
    }
    return out;
}

inline CanonicalBC canonicalize(const BCMatrices& bc) {
    auto v = validate_bc(bc);
    if (!v.ok) throw BcError("invalid boundary conditions: " + v.description);
    double scale = stacked(bc).norm();
    double tol = kBcTol * scale;

    Eigen::JacobiSVD<Mat2> svdC(bc.C);
    int rankC = 0;
    for (int i = 0; i < 2; ++i)
        if (svdC.singularValues()(i) > tol) ++rankC;

    CanonicalBC cb;
    if (rankC == 2) {
        cb.family = BcFamily::FullRank;
        cb.transform = bc.C.inverse();
        cb.B = cb.transform * bc.D;
        // enforce exact Hermiticity of the reported parameter
        cb.B = 0.5 * (cb.B + cb.B.adjoint()).eval();
        cb.separated = std::abs(cb.B(0, 1)) <= kBcTol * (1.0 + cb.B.norm());
    } else if (rankC == 0) {
        cb.family = BcFamily::Dirichlet;
        cb.transform = bc.D.inverse();
        cb.separated = true;
    } else {
        // rank 1: row-reduce C to [[c1, c2], [0, 0]], carrying D along
        Mat2 M = Mat2::Identity();
        Mat2 C = bc.C, D = bc.D;
        auto apply = [&](const Mat2& E) {
            M = (E * M).eval();
            C = (E * C).eval();
            D = (E * D).eval();
        };
        if (C.row(1).norm() > C.row(0).norm()) {
            Mat2 swap;
            swap << 0, 1, 1, 0;
            apply(swap);
        }
        {
            Cplx f = C.row(0).dot(C.row(0)) == 0.0
                         ? Cplx(0)
                         : (C.row(1) * C.row(0).adjoint())(0, 0) / (C.row(0) * C.row(0).adjoint())(0, 0);
            Mat2 E = Mat2::Identity();
            E(1, 0) = -f;
            apply(E);
        }
        C.row(1).setZero();
        Cplx c1 = C(0, 0), c2 = C(0, 1);
        if (std::abs(c1) <= tol && std::abs(c2) > tol) {
            // C -> [[0,1],[0,0]] ; D -> [[0,d],[1,0]]
            {
                Mat2 E = Mat2::Identity();
                E(0, 0) = 1.0 / c2;
                apply(E);
            }
            if (std::abs(D(1, 0)) <= tol) throw BcError("rank(C|D) degenerate in case a)");
            {
                Mat2 E = Mat2::Identity();
                E(1, 1) = 1.0 / D(1, 0);
                apply(E);
            }
            {
                Mat2 E = Mat2::Identity();  // clear D(0,0) using row 2
                E(0, 1) = -D(0, 0);
                apply(E);
            }
            cb.family = BcFamily::LeftDirichletRobin;
            cb.d = D(0, 1).real();
            cb.separated = true;
        } else if (std::abs(c2) <= tol && std::abs(c1) > tol) {
            // C -> [[1,0],[0,0]] ; D -> [[d,0],[0,1]]
            {
                Mat2 E = Mat2::Identity();
                E(0, 0) = 1.0 / c1;
                apply(E);
            }
            if (std::abs(D(1, 1)) <= tol) throw BcError("rank(C|D) degenerate in case b)");
            {
                Mat2 E = Mat2::Identity();
                E(1, 1) = 1.0 / D(1, 1);
                apply(E);
            }
            {
                Mat2 E = Mat2::Identity();  // clear D(0,1) using row 2
                E(0, 1) = -D(0, 1);
                apply(E);
            }
            cb.family = BcFamily::RobinRightDirichlet;
            cb.d = D(0, 0).real();
            cb.separated = true;
        } else {
            // coupled: C -> [[1, conj(c)],[0,0]], D -> [[d,0],[-c,1]]
            {
                Mat2 E = Mat2::Identity();
                E(0, 0) = 1.0 / c1;
                apply(E);
            }
            Cplx c = std::conj(C(0, 1));
            if (std::abs(D(1, 1)) <= tol) throw BcError("rank(C|D) degenerate in case c)");
            {
                Mat2 E = Mat2::Identity();
                E(1, 1) = 1.0 / D(1, 1);
                apply(E);
            }
            {
                Mat2 E = Mat2::Identity();  // clear D(0,1) using row 2 (leaves C row 1 = 0)
                E(0, 1) = -D(0, 1);
                apply(E);
            }
            cb.family = BcFamily::Coupled;
            cb.c = c;
            cb.d = D(0, 0).real();
            cb.separated = false;
            cb.unit_modulus_c = std::abs(std::abs(c) - 1.0) <= kBcTol;
        }
        cb.transform = M;
    }
    cb.canonical_pair = canonical_matrices(cb);
    return cb;
}

// true iff an invertible M maps (C1,D1) to (C2,D2)
inline bool row_equivalent(const BCMatrices& p1, const BCMatrices& p2) {
    if (!validate_bc(p1).ok || !validate_bc(p2).ok) throw BcError("row_equivalent: invalid pair");
    Mat24 A1 = stacked(p1), A2 = stacked(p2);
    // unique M = A2 A1^+ since A1 has full row rank
    Mat2 G = (A1 * A1.adjoint());
    Mat2 M = A2 * A1.adjoint() * G.inverse();
    double resid = (M * A1 - A2).norm();
    double scale = A2.norm() + A1.norm();
    if (resid > kBcTol * scale) return false;
    return std::abs(M.determinant()) > kBcTol;
}

// -- common named conditions --------------------------------------------------

inline BCMatrices dirichlet_bc() {
    BCMatrices bc;
    bc.C = Mat2::Zero();
    bc.D = Mat2::Identity();
    return bc;
}

inline BCMatrices neumann_bc() {
    BCMatrices bc;
    bc.C = Mat2::Identity();
    bc.D = Mat2::Zero();
    return bc;
}

// coupled family (eq. of the Coupled canonical pair)
inline BCMatrices coupled_bc(Cplx c, double d = 0.0) {
    BCMatrices bc;
    bc.C << 1, std::conj(c), 0, 0;
    bc.D << d, 0, -c, 1;
    return bc;
}

inline BCMatrices periodic_bc(double d = 0.0) { return coupled_bc(1.0, d); }
inline BCMatrices antiperiodic_bc(double d = 0.0) { return coupled_bc(-1.0, d); }

// f'(a) = da f(a), -f'(b) = db f(b)
inline BCMatrices robin_bc(double da, double db) {
    BCMatrices bc;
    bc.C = Mat2::Identity();
    bc.D << da, 0, 0, db;
    return bc;
}

}  // namespace rbp
