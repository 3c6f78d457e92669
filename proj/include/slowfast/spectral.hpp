#pragma once

#include <cassert>
#include <cmath>
#include <cstddef>
#include <memory>
#include <stdexcept>
#include <vector>

namespace slowfast {

/// Eigenbasis of the linear operator A: A e_k = -lambda_k e_k with
/// 0 < lambda_1 < lambda_2 < ... Eigenvalues are stored explicitly so test
/// operators other than the Dirichlet Laplacian can be injected.
class SpectralBasis {
public:
    static constexpr std::size_t max_modes = 512;

    explicit SpectralBasis(std::vector<double> eigenvalues)
        : eigenvalues_(std::move(eigenvalues)) {
        if (eigenvalues_.empty() || eigenvalues_.size() > max_modes)
            throw std::invalid_argument("SpectralBasis: mode count out of range");
        double prev = 0.0;
        for (double lam : eigenvalues_) {
            if (!(lam > prev))
                throw std::invalid_argument("SpectralBasis: eigenvalues must be positive and strictly increasing");
            prev = lam;
        }
    }

    /// Dirichlet Laplacian on (0,1): lambda_k = (k pi)^2.
    static SpectralBasis laplacian(std::size_t m) {
        std::vector<double> lam(m);
        for (std::size_t k = 0; k < m; ++k) {
            const double kp = static_cast<double>(k + 1) * M_PI;
            lam[k] = kp * kp;
        }
        return SpectralBasis(std::move(lam));
    }

    std::size_t size() const { return eigenvalues_.size(); }
    double lambda(std::size_t k) const { return eigenvalues_[k]; }
    const std::vector<double>& eigenvalues() const { return eigenvalues_; }

    bool operator==(const SpectralBasis& other) const {
        return eigenvalues_ == other.eigenvalues_;
    }

private:
    std::vector<double> eigenvalues_;
};

/// Element of the span of the first m eigenmodes, stored as mode coefficients
/// u_k = <u, e_k>. Immutable-by-convention value type.
struct SpectralField {
    std::shared_ptr<const SpectralBasis> basis;
    std::vector<double> coeffs;

    SpectralField() = default;
    SpectralField(std::shared_ptr<const SpectralBasis> b, std::vector<double> c)
        : basis(std::move(b)), coeffs(std::move(c)) {
        assert(basis && coeffs.size() == basis->size());
    }

    static SpectralField zero(std::shared_ptr<const SpectralBasis> b) {
        std::vector<double> c(b->size(), 0.0);
        return SpectralField(std::move(b), std::move(c));
    }

    /// Unit eigenvector e_{k+1} (zero-based index k).
    static SpectralField unit(std::shared_ptr<const SpectralBasis> b, std::size_t k) {
        std::vector<double> c(b->size(), 0.0);
        c.at(k) = 1.0;
        return SpectralField(std::move(b), std::move(c));
    }

    std::size_t size() const { return coeffs.size(); }
    double operator[](std::size_t k) const { return coeffs[k]; }
};

inline SpectralField operator+(const SpectralField& a, const SpectralField& b) {
    assert(a.size() == b.size());
    SpectralField r = a;
    for (std::size_t k = 0; k < r.coeffs.size(); ++k) r.coeffs[k] += b.coeffs[k];
    return r;
}

inline SpectralField operator-(const SpectralField& a, const SpectralField& b) {
    assert(a.size() == b.size());
    SpectralField r = a;
    for (std::size_t k = 0; k < r.coeffs.size(); ++k) r.coeffs[k] -= b.coeffs[k];
    return r;
}

inline SpectralField operator*(double s, const SpectralField& a) {
    SpectralField r = a;
    for (double& c : r.coeffs) c *= s;
    return r;
}

/// Fractional Sobolev norm ||u||_s = (sum_k lambda_k^s u_k^2)^{1/2}.
/// Summation runs in descending index order so results are bitwise
/// reproducible across runs.
inline double sobolev_norm(const SpectralField& u, double s) {
    double acc = 0.0;
    for (std::size_t k = u.size(); k-- > 0;) {
        const double w = (s == 0.0) ? 1.0 : std::pow(u.basis->lambda(k), s);
        acc += w * u.coeffs[k] * u.coeffs[k];
    }
    return std::sqrt(acc);
}

/// H-norm |u| = ||u||_0.
inline double h_norm(const SpectralField& u) { return sobolev_norm(u, 0.0); }

/// Semigroup e^{tA}: per-mode decay e^{-lambda_k t}.
inline SpectralField apply_semigroup(const SpectralField& u, double t) {
    if (t < 0.0) throw std::invalid_argument("apply_semigroup: t must be nonnegative");
    SpectralField r = u;
    for (std::size_t k = 0; k < r.size(); ++k)
        r.coeffs[k] *= std::exp(-u.basis->lambda(k) * t);
    return r;
}

/// Fractional power (-A)^{s/2}: per-mode scaling lambda_k^{s/2}.
inline SpectralField apply_fractional(const SpectralField& u, double s) {
    SpectralField r = u;
    if (s == 0.0) return r;
    for (std::size_t k = 0; k < r.size(); ++k)
        r.coeffs[k] *= std::pow(u.basis->lambda(k), s / 2.0);
    return r;
}

/// Galerkin projection pi_m onto the first m modes (returns a field over a
/// truncated basis sharing the leading eigenvalues).
inline SpectralField project(const SpectralField& u, std::size_t m) {
    if (m > u.size()) throw std::invalid_argument("project: m exceeds basis size");
    if (m == u.size()) return u;
    auto sub = std::make_shared<SpectralBasis>(std::vector<double>(
        u.basis->eigenvalues().begin(), u.basis->eigenvalues().begin() + static_cast<long>(m)));
    return SpectralField(std::move(sub),
                         std::vector<double>(u.coeffs.begin(), u.coeffs.begin() + static_cast<long>(m)));
}

}  // namespace slowfast
