#include "msad/fusion.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace msad {

std::string_view kernel_name(KernelType k) { return k == KernelType::Rbf ? "rbf" : "linear"; }

KernelType parse_kernel(std::string_view text) {
    if (text == "rbf") return KernelType::Rbf;
    if (text == "linear") return KernelType::Linear;
    throw ParameterError("unknown kernel '" + std::string(text) + "' (expected rbf or linear)");
}

double kernel_value(KernelType kernel, double gamma, std::span<const double> a, std::span<const double> b) {
    double acc = 0.0;
    if (kernel == KernelType::Linear) {
        for (std::size_t k = 0; k < a.size(); ++k) acc += a[k] * b[k];
        return acc;
    }
    for (std::size_t k = 0; k < a.size(); ++k) {
        double d = a[k] - b[k];
        acc += d * d;
    }
    return std::exp(-gamma * acc);
}

OcsvmDual solve_ocsvm_dual(std::size_t n, double nu,
                           const std::function<void(std::size_t, std::vector<double>&)>& kernel_row,
                           std::span<const double> diagonal, double tolerance) {
    if (n < 2) throw ParameterError("one-class SVM needs at least two training vectors");
    if (!(nu > 0.0) || nu > 1.0) throw ParameterError("nu must lie in (0, 1]");
    constexpr double kTau = 1e-12;

    OcsvmDual out;
    const double c = 1.0 / (nu * static_cast<double>(n));
    out.upper_bound = c;
    auto& alpha = out.alpha;
    alpha.assign(n, 0.0);
    // Feasible start: fill the first floor(nu n) entries to the bound, remainder to the next.
    double remaining = 1.0;
    for (std::size_t i = 0; i < n && remaining > 0.0; ++i) {
        alpha[i] = std::min(c, remaining);
        remaining -= alpha[i];
    }

    std::vector<double> grad(n, 0.0), qi, qj;
    for (std::size_t i = 0; i < n; ++i) {
        if (alpha[i] == 0.0) continue;
        kernel_row(i, qi);
        for (std::size_t t = 0; t < n; ++t) grad[t] += alpha[i] * qi[t];
    }

    const std::size_t max_iter = std::max<std::size_t>(10'000'000, 100 * n);
    double gap = 0.0;
    for (out.iterations = 0; out.iterations < max_iter; ++out.iterations) {
        // i: most violating index that can grow; gap against the smallest -G that can shrink.
        std::size_t i = n;
        double gmax = -std::numeric_limits<double>::infinity();
        for (std::size_t t = 0; t < n; ++t)
            if (alpha[t] < c && -grad[t] > gmax) {
                gmax = -grad[t];
                i = t;
            }
        double gmin = std::numeric_limits<double>::infinity();
        std::size_t j = n;
        double best_obj = std::numeric_limits<double>::infinity();
        if (i < n) kernel_row(i, qi);
        for (std::size_t t = 0; t < n; ++t) {
            if (!(alpha[t] > 0.0)) continue;
            gmin = std::min(gmin, -grad[t]);
            double b = gmax + grad[t];
            if (b > 0.0 && i < n) {
                double a = diagonal[i] + diagonal[t] - 2.0 * qi[t];
                if (a <= 0.0) a = kTau;
                double obj = -(b * b) / a;
                if (obj < best_obj) {
                    best_obj = obj;
                    j = t;
                }
            }
        }
        gap = gmax - gmin;
        if (i == n || j == n || gap < tolerance) break;

        kernel_row(j, qj);
        double a = diagonal[i] + diagonal[j] - 2.0 * qi[j];
        if (a <= 0.0) a = kTau;
        double delta = (gmax + grad[j]) / a;  // (G_j - G_i) / a
        delta = std::min({delta, c - alpha[i], alpha[j]});
        if (!(delta > 0.0)) break;
        alpha[i] += delta;
        alpha[j] -= delta;
        if (alpha[j] < 1e-15 * c) alpha[j] = 0.0;
        if (c - alpha[i] < 1e-15 * c) alpha[i] = c;
        for (std::size_t t = 0; t < n; ++t) grad[t] += delta * (qi[t] - qj[t]);
    }
    out.kkt_residual = std::max(0.0, gap);

    // rho: mean gradient over free vectors, else the midpoint of the feasible interval.
    double sum_free = 0.0;
    std::size_t n_free = 0;
    double lower = -std::numeric_limits<double>::infinity();  // max G over alpha = C
    double upper = std::numeric_limits<double>::infinity();   // min G over alpha = 0
    for (std::size_t t = 0; t < n; ++t) {
        if (alpha[t] >= c)
            lower = std::max(lower, grad[t]);
        else if (alpha[t] <= 0.0)
            upper = std::min(upper, grad[t]);
        else {
            sum_free += grad[t];
            ++n_free;
        }
    }
    if (n_free > 0)
        out.rho = sum_free / static_cast<double>(n_free);
    else if (std::isfinite(lower) && std::isfinite(upper))
        out.rho = 0.5 * (lower + upper);
    else
        out.rho = std::isfinite(lower) ? lower : upper;
    return out;
}

double default_gamma(const std::vector<std::vector<double>>& training) {
    if (training.empty() || training.front().empty()) return 1.0;
    const double d = static_cast<double>(training.front().size());
    double sum = 0.0, count = 0.0;
    double lo = training.front().front(), hi = lo;
    for (const auto& v : training)
        for (double x : v) {
            sum += x;
            count += 1.0;
            lo = std::min(lo, x);
            hi = std::max(hi, x);
        }
    // Constant entries: the rounded mean would leave a tiny spurious variance.
    if (lo == hi) return 1.0 / d;
    double mean = sum / count, ss = 0.0;
    for (const auto& v : training)
        for (double x : v) ss += (x - mean) * (x - mean);
    double var = ss / count;
    return var > 0.0 ? 1.0 / (d * var) : 1.0 / d;
}

GatingModel fit_gating(std::vector<std::vector<double>> training, ModalitySubset subset, const GatingOptions& options) {
    if (training.size() < 2) throw ParameterError("fit_gating: need at least two training vectors");
    if (!(options.nu > 0.0) || options.nu > 1.0) throw ParameterError("fit_gating: nu must lie in (0, 1]");
    const std::size_t d = subset.size();
    if (d == 0 || d > 3) throw ParameterError("fit_gating: modality subset must have 1 to 3 members");
    for (const auto& v : training) {
        if (v.size() != d) throw DataError("fit_gating: training vector dimension does not match the subset");
        for (double x : v)
            if (!std::isfinite(x)) throw DataError("fit_gating: non-finite training score");
    }
    if (options.gamma && !(*options.gamma > 0.0)) throw ParameterError("fit_gating: gamma must be positive");
    std::sort(training.begin(), training.end());

    GatingModel model;
    model.kernel = options.kernel;
    model.gamma = options.gamma.value_or(default_gamma(training));
    model.nu = options.nu;
    model.subset = subset;
    model.training_count = training.size();

    const std::size_t n = training.size();
    std::vector<double> diag(n);
    for (std::size_t i = 0; i < n; ++i) diag[i] = kernel_value(model.kernel, model.gamma, training[i], training[i]);
    auto row = [&](std::size_t i, std::vector<double>& out) {
        out.resize(n);
        for (std::size_t t = 0; t < n; ++t) out[t] = kernel_value(model.kernel, model.gamma, training[i], training[t]);
    };
    auto dual = solve_ocsvm_dual(n, options.nu, row, diag, options.tolerance);
    model.rho = dual.rho;
    model.kkt_residual = dual.kkt_residual;
    for (std::size_t i = 0; i < n; ++i) {
        if (dual.alpha[i] > 0.0) {
            model.support_vectors.push_back(training[i]);
            model.alphas.push_back(dual.alpha[i]);
        }
    }
    return model;
}

double gate_score(const GatingModel& model, std::span<const double> v) {
    if (v.size() != model.dim())
        throw DataError("gate_score: vector has " + std::to_string(v.size()) + " entries, model subset " +
                        model.subset.label() + " expects " + std::to_string(model.dim()));
    double acc = 0.0;
    for (std::size_t i = 0; i < model.support_vectors.size(); ++i)
        acc += model.alphas[i] * kernel_value(model.kernel, model.gamma, model.support_vectors[i], v);
    return model.rho - acc;
}

nlohmann::json gating_to_json(const GatingModel& model) {
    nlohmann::json subset = nlohmann::json::array();
    for (auto m : model.subset.members()) subset.push_back(std::string(modality_name(m)));
    nlohmann::json scalers = nlohmann::json::array();
    for (const auto& s : model.scalers)
        scalers.push_back({{"modality", std::string(modality_name(s.modality))},
                           {"median", s.median},
                           {"iqr", s.iqr},
                           {"degenerate", s.degenerate}});
    return {{"kernel", std::string(kernel_name(model.kernel))},
            {"gamma", model.gamma},
            {"nu", model.nu},
            {"rho", model.rho},
            {"subset", subset},
            {"support_vectors", model.support_vectors},
            {"alphas", model.alphas},
            {"kkt_residual", model.kkt_residual},
            {"training_count", model.training_count},
            {"scalers", scalers}};
}

GatingModel gating_from_json(const nlohmann::json& doc) {
    try {
        GatingModel model;
        model.kernel = parse_kernel(doc.at("kernel").get<std::string>());
        model.gamma = doc.at("gamma").get<double>();
        model.nu = doc.at("nu").get<double>();
        model.rho = doc.at("rho").get<double>();
        std::vector<Modality> members;
        for (const auto& m : doc.at("subset")) members.push_back(parse_modality(m.get<std::string>()));
        model.subset = ModalitySubset(members);
        model.support_vectors = doc.at("support_vectors").get<std::vector<std::vector<double>>>();
        model.alphas = doc.at("alphas").get<std::vector<double>>();
        model.kkt_residual = doc.value("kkt_residual", 0.0);
        model.training_count = doc.value("training_count", std::size_t{0});
        for (const auto& s : doc.value("scalers", nlohmann::json::array()))
            model.scalers.push_back({parse_modality(s.at("modality").get<std::string>()), s.at("median").get<double>(),
                                     s.at("iqr").get<double>(), s.at("degenerate").get<bool>()});
        if (model.alphas.size() != model.support_vectors.size())
            throw DataError("gating model: alphas and support vectors differ in length");
        for (const auto& sv : model.support_vectors)
            if (sv.size() != model.dim()) throw DataError("gating model: support vector dimension mismatch");
        return model;
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("malformed gating model: ") + e.what());
    }
}

}  // namespace msad
