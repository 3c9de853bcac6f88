#pragma once

#include "msad/core.hpp"

#include <json.hpp>

#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace msad {

enum class KernelType { Rbf, Linear };

std::string_view kernel_name(KernelType k);
KernelType parse_kernel(std::string_view text);

/// Result of the one-class SVM dual: minimize 1/2 a'Qa s.t. 0 <= a_i <= C, sum a_i = 1.
struct OcsvmDual {
    std::vector<double> alpha;
    double rho = 0.0;
    double upper_bound = 0.0;  // C = 1 / (nu n)
    double kkt_residual = 0.0; // max violating-pair gap at termination
    std::size_t iterations = 0;
};

/// SMO with second-order working-set selection. `kernel_row(i, out)` fills column i of Q.
OcsvmDual solve_ocsvm_dual(std::size_t n, double nu, const std::function<void(std::size_t, std::vector<double>&)>& kernel_row,
                           std::span<const double> diagonal, double tolerance = 1e-10);

struct GatingOptions {
    double nu = 0.5;
    std::optional<double> gamma;  // default 1 / (d * var(training entries))
    KernelType kernel = KernelType::Rbf;
    double tolerance = 1e-10;
};

struct ScalerRecord {
    Modality modality = Modality::Rgb;
    double median = 0.0;
    double iqr = 1.0;
    bool degenerate = false;
};

/// Decision gating unit: a one-class SVM over per-modality normalized score vectors.
struct GatingModel {
    KernelType kernel = KernelType::Rbf;
    double gamma = 1.0;
    double nu = 0.5;
    double rho = 0.0;
    ModalitySubset subset;
    std::vector<std::vector<double>> support_vectors;
    std::vector<double> alphas;
    double kkt_residual = 0.0;
    std::size_t training_count = 0;
    std::vector<ScalerRecord> scalers;

    std::size_t dim() const { return subset.size(); }
};

/// 1 / (d * population variance of all training entries); 1 / d when the variance is zero.
double default_gamma(const std::vector<std::vector<double>>& training);

double kernel_value(KernelType kernel, double gamma, std::span<const double> a, std::span<const double> b);

/// Fits the gating model. Training vectors are put in lexicographic order first, so the
/// model does not depend on input order. Needs n >= 2, 0 < nu <= 1, dimension = |subset| <= 3.
GatingModel fit_gating(std::vector<std::vector<double>> training, ModalitySubset subset,
                       const GatingOptions& options = {});

/// S = rho - sum_i alpha_i k(x_i, v); larger is more anomalous.
double gate_score(const GatingModel& model, std::span<const double> v);

nlohmann::json gating_to_json(const GatingModel& model);
GatingModel gating_from_json(const nlohmann::json& doc);

enum class FusionRule { Max, Mean, Single };

std::string_view fusion_rule_name(FusionRule r);
FusionRule parse_fusion_rule(std::string_view text);

double rule_fuse(std::span<const double> v, FusionRule rule);

/// sample key -> normalized score for one modality.
using ScoreTable = std::map<std::string, double>;

struct AssembledScores {
    std::vector<std::string> keys;
    std::vector<std::vector<double>> vectors;  // entries in canonical modality order
    std::vector<std::string> dropped;          // keys missing from at least one table
};

/// Joins per-modality tables on sample key for the modalities of `subset`. Keys missing
/// from any table are dropped with a warning; an empty intersection is an error.
AssembledScores assemble_score_vectors(const std::map<Modality, ScoreTable>& tables, ModalitySubset subset);

}  // namespace msad
