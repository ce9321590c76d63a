#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace ldg::train {

/// Confusion matrix with rows = true class, columns = predicted class (0-based).
struct Metrics {
    std::vector<std::vector<std::uint64_t>> confusion;
    double oa = 0.0;
    std::vector<double> ca;  // per-class recall; 0 for a class with no samples
    double kappa = 0.0;

    std::uint64_t total() const;
};

/// OA = trace/total; p_e = sum_c row_c*col_c/total^2; kappa = (OA - p_e)/(1 - p_e),
/// taken as 1 when p_e = 1 and the matrix is all on the diagonal (0 otherwise).
Metrics metrics_from_confusion(std::vector<std::vector<std::uint64_t>> confusion);

/// Order-independent accumulation of (truth, prediction) pairs.
void add_prediction(std::vector<std::vector<std::uint64_t>>& confusion, std::size_t truth, std::size_t predicted);

/// {"oa":..,"kappa":..,"ca":[..],"confusion":[[..]]}
std::string metrics_to_json(const Metrics& m);

}  // namespace ldg::train
