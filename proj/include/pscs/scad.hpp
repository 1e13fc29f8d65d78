#pragma once

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>
#include <random>
#include <string>

#include "linear_operator.hpp"
#include "power_iteration.hpp"
#include "splitting.hpp"
#include "vector.hpp"

namespace pscs {

/*
 * SCAD-regularized least squares
 *
 *   E(u) = ½‖Au − b‖² + λ‖u‖₁ − P₂(u),   P₂(u) = Σᵢ p₂(uᵢ),
 *
 * where λ‖u‖₁ − P₂ is the SCAD penalty written as a difference of convex
 * functions. p₂ is the C¹ concave correction with parameters λ > 0, θ > 2.
 */

struct ScadParams {
    double lambda_reg = 0.0;
    double theta = 0.0;
};

inline void validate(const ScadParams& p) {
    if (!(p.lambda_reg > 0.0)) throw std::invalid_argument("ScadParams: lambda_reg must be positive");
    if (!(p.theta > 2.0)) throw std::invalid_argument("ScadParams: theta must exceed 2");
}

inline double scad_lipschitz(const ScadParams& p) { return 1.0 / (p.theta - 1.0); }

/* p₂ integrates u ↦ [min{θλ, |u|} − λ]₊ / (θ−1) from 0; closed form: */
inline double scad_p2(double u, const ScadParams& p) {
    const double a = std::abs(u);
    const double lam = p.lambda_reg;
    if (a <= lam) return 0.0;
    if (a < p.theta * lam) {
        double d = a - lam;
        return d * d / (2.0 * (p.theta - 1.0));
    }
    return lam * a - lam * lam * (p.theta + 1.0) / 2.0;
}

inline double scad_p2(const Vector& u, const ScadParams& p) {
    double s = 0.0;
    for (double v : u) s += scad_p2(v, p);
    return s;
}

inline double scad_grad_p2(double u, const ScadParams& p) {
    const double a = std::abs(u);
    const double t = std::max(std::min(p.theta * p.lambda_reg, a) - p.lambda_reg, 0.0);
    const double g = t / (p.theta - 1.0);
    return u > 0.0 ? g : (u < 0.0 ? -g : 0.0);
}

inline Vector scad_grad_p2(const Vector& u, const ScadParams& p) {
    Vector g(u.size());
    for (std::size_t i = 0; i < u.size(); ++i) g[i] = scad_grad_p2(u[i], p);
    return g;
}

/** SCAD penalty λ‖u‖₁ − P₂(u); per coordinate it plateaus at λ²(θ+1)/2. */
inline double scad_penalty(const Vector& u, const ScadParams& p) {
    double l1 = 0.0;
    for (double v : u) l1 += std::abs(v);
    return p.lambda_reg * l1 - scad_p2(u, p);
}

struct ScadInstance {
    std::shared_ptr<const DenseMatrix> a;
    Vector b;
    ScadParams params;
    Vector ground_truth;
    double lambda_ata = 0.0;
    std::uint64_t seed = 0;
    std::uint32_t size_index = 0; // i for the (720i, 2560i, 80i) family; 0 = custom dims
};

inline double scad_energy(const ScadInstance& inst, const Vector& u) {
    Vector r(inst.a->rows());
    inst.a->apply(u, r);
    axpy(-1.0, inst.b, r);
    return 0.5 * norm2_sq(r) + scad_penalty(u, inst.params);
}

/**
 * Random instance: A is m×k with N(0,1) entries drawn column by column and
 * each column normalized to unit length; the ground truth has s standard
 * normal entries on a uniformly drawn support; b = Ay − 0.01 n̂. The draw
 * order (A, support, values, noise) is part of the format: (dims, seed)
 * regenerate the instance bit for bit.
 */
inline ScadInstance make_instance(std::size_t m, std::size_t k, std::size_t s,
                                  const ScadParams& params, std::uint64_t seed,
                                  double spectral_tol = 1e-10) {
    validate(params);
    if (s > k) throw std::invalid_argument("make_instance: support larger than dimension");

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);

    auto a = std::make_shared<DenseMatrix>(m, k);
    for (std::size_t j = 0; j < k; ++j) {
        double* cj = a->col(j);
        for (std::size_t i = 0; i < m; ++i) cj[i] = gauss(rng);
        double nrm = 0.0;
        for (std::size_t i = 0; i < m; ++i) nrm += cj[i] * cj[i];
        nrm = std::sqrt(nrm);
        for (std::size_t i = 0; i < m; ++i) cj[i] /= nrm;
    }

    std::vector<std::size_t> idx(k);
    for (std::size_t j = 0; j < k; ++j) idx[j] = j;
    for (std::size_t j = 0; j < s; ++j) {
        std::uniform_int_distribution<std::size_t> pick(j, k - 1);
        std::swap(idx[j], idx[pick(rng)]);
    }
    std::vector<std::size_t> support(idx.begin(), idx.begin() + s);
    std::sort(support.begin(), support.end());

    ScadInstance inst;
    inst.a = a;
    inst.params = params;
    inst.seed = seed;
    inst.ground_truth.assign(k, 0.0);
    for (std::size_t j : support) inst.ground_truth[j] = gauss(rng);

    inst.b.resize(m);
    a->apply(inst.ground_truth, inst.b);
    for (std::size_t i = 0; i < m; ++i) inst.b[i] -= 0.01 * gauss(rng);

    if (spectral_tol > 0.0) {
        GramOp gram(a);
        auto est = estimate_spectral_norm(gram, spectral_tol, 50000);
        inst.lambda_ata = est.value * (1.0 + 1e-6);
    }
    return inst;
}

inline ScadInstance generate_instance(std::uint32_t i, std::uint64_t seed, const ScadParams& params,
                                      double spectral_tol = 1e-10) {
    if (i < 1) throw std::invalid_argument("generate_instance: size index must be >= 1");
    ScadInstance inst =
        make_instance(720u * i, 2560u * i, 80u * i, params, seed, spectral_tol);
    inst.size_index = i;
    return inst;
}

/**
 * First-order residual ‖G(u)‖ with
 *   G(u) = (1/γ)(u − prox_{γλ‖·‖₁}(u − γ ∇I₁(u))),
 * ∇I₁(u) = Aᵀ(Au − b) − ∇p₂(u), so G vanishes exactly at stationary points
 * of E. literal_i1 flips the ∇p₂ sign to +, reproducing a published variant
 * that measures a different objective.
 */
inline double residual_gproj(const Vector& u, const ScadInstance& inst, double gamma_proj = 1.0,
                             bool literal_i1 = false) {
    if (!(gamma_proj > 0.0)) throw std::invalid_argument("residual_gproj: gamma must be positive");
    Vector r(inst.a->rows());
    inst.a->apply(u, r);
    axpy(-1.0, inst.b, r);
    Vector g(inst.a->cols());
    inst.a->apply_transpose(r, g);
    Vector p2g = scad_grad_p2(u, inst.params);
    axpy(literal_i1 ? 1.0 : -1.0, p2g, g);

    double acc = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        double step = u[i] - gamma_proj * g[i];
        double prox = soft_threshold(step, gamma_proj * inst.params.lambda_reg);
        double gi = (u[i] - prox) / gamma_proj;
        acc += gi * gi;
    }
    return std::sqrt(acc);
}

/** Wire the instance into the generic splitting problem: H = λ‖u‖₁ + ½‖Au−b‖², F = −P₂. */
inline SplitProblem make_split_problem(const ScadInstance& inst) {
    if (!(inst.lambda_ata > 0.0))
        throw std::invalid_argument("make_split_problem: instance lacks lambda_ata");
    L1PlusQuadratic st;
    st.a = inst.a;
    st.b = inst.b;
    st.lambda_reg = inst.params.lambda_reg;
    st.lambda_ata = inst.lambda_ata;
    st.atb.resize(inst.a->cols());
    inst.a->apply_transpose(inst.b, st.atb);

    SplitProblem prob;
    prob.dim = inst.a->cols();
    prob.h = std::move(st);
    prob.lipschitz_l = scad_lipschitz(inst.params);
    ScadParams params = inst.params;
    prob.grad_f = [params](const Vector& u) { return scaled(scad_grad_p2(u, params), -1.0); };
    auto a = inst.a;
    Vector b = inst.b;
    prob.energy = [a, b, params](const Vector& u) {
        Vector r(a->rows());
        a->apply(u, r);
        axpy(-1.0, b, r);
        return 0.5 * norm2_sq(r) + scad_penalty(u, params);
    };
    return prob;
}

namespace detail {

template <typename T> void put_raw(std::ofstream& out, const T& v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T> T get_raw(std::ifstream& in) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    return v;
}

inline void put_vec(std::ofstream& out, const Vector& v) {
    out.write(reinterpret_cast<const char*>(v.data()),
              static_cast<std::streamsize>(v.size() * sizeof(double)));
}

inline void get_vec(std::ifstream& in, Vector& v, std::size_t n) {
    v.resize(n);
    in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * sizeof(double)));
}

} // namespace detail

/*
 * Native-endian binary container (magic "PSCSSCAD", version 1) with the raw
 * entries, plus a small JSON sidecar at path + ".json" for human inspection.
 * Regenerating from (dims, seed) is the portable route; the container exists
 * so a run can be archived with its exact data.
 */
inline void save_instance(const ScadInstance& inst, const std::string& path) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) throw std::runtime_error("cannot open " + tmp + " for writing");
        out.write("PSCSSCAD", 8);
        detail::put_raw<std::uint32_t>(out, 1u);
        detail::put_raw<std::uint64_t>(out, inst.a->rows());
        detail::put_raw<std::uint64_t>(out, inst.a->cols());
        detail::put_raw<std::uint64_t>(out, inst.seed);
        detail::put_raw<std::uint32_t>(out, inst.size_index);
        detail::put_raw<double>(out, inst.params.lambda_reg);
        detail::put_raw<double>(out, inst.params.theta);
        detail::put_raw<double>(out, inst.lambda_ata);
        for (std::size_t j = 0; j < inst.a->cols(); ++j)
            out.write(reinterpret_cast<const char*>(inst.a->col(j)),
                      static_cast<std::streamsize>(inst.a->rows() * sizeof(double)));
        detail::put_vec(out, inst.b);
        detail::put_vec(out, inst.ground_truth);
        if (!out) throw std::runtime_error("short write to " + tmp);
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0)
        throw std::runtime_error("cannot move " + tmp + " into place");

    std::size_t nnz = 0;
    for (double v : inst.ground_truth)
        if (v != 0.0) ++nnz;
    std::ofstream side(path + ".json", std::ios::binary);
    side << "{\n"
         << "  \"format\": \"PSCSSCAD\",\n"
         << "  \"version\": 1,\n"
         << "  \"m\": " << inst.a->rows() << ",\n"
         << "  \"k\": " << inst.a->cols() << ",\n"
         << "  \"s\": " << nnz << ",\n"
         << "  \"seed\": " << inst.seed << ",\n"
         << "  \"size_index\": " << inst.size_index << ",\n"
         << "  \"lambda_reg\": " << fmt_double(inst.params.lambda_reg) << ",\n"
         << "  \"theta\": " << fmt_double(inst.params.theta) << ",\n"
         << "  \"lambda_ata\": " << fmt_double(inst.lambda_ata) << "\n"
         << "}\n";
}

inline ScadInstance load_instance(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    char magic[8];
    in.read(magic, 8);
    if (std::memcmp(magic, "PSCSSCAD", 8) != 0)
        throw std::runtime_error(path + " is not an instance container");
    auto version = detail::get_raw<std::uint32_t>(in);
    if (version != 1u) throw std::runtime_error("unsupported instance version");
    auto m = detail::get_raw<std::uint64_t>(in);
    auto k = detail::get_raw<std::uint64_t>(in);

    ScadInstance inst;
    inst.seed = detail::get_raw<std::uint64_t>(in);
    inst.size_index = detail::get_raw<std::uint32_t>(in);
    inst.params.lambda_reg = detail::get_raw<double>(in);
    inst.params.theta = detail::get_raw<double>(in);
    inst.lambda_ata = detail::get_raw<double>(in);

    auto a = std::make_shared<DenseMatrix>(m, k);
    for (std::size_t j = 0; j < k; ++j)
        in.read(reinterpret_cast<char*>(a->col(j)),
                static_cast<std::streamsize>(m * sizeof(double)));
    inst.a = a;
    detail::get_vec(in, inst.b, m);
    detail::get_vec(in, inst.ground_truth, k);
    if (!in) throw std::runtime_error("truncated instance container " + path);
    return inst;
}

} // namespace pscs
