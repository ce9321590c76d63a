#include "ldg/train/metrics.hpp"

#include <stdexcept>

#include "json.hpp"

namespace ldg::train {

std::uint64_t Metrics::total() const {
    std::uint64_t n = 0;
    for (const auto& row : confusion)
        for (auto v : row) n += v;
    return n;
}

Metrics metrics_from_confusion(std::vector<std::vector<std::uint64_t>> confusion) {
    const std::size_t c = confusion.size();
    for (const auto& row : confusion)
        if (row.size() != c) throw std::invalid_argument("confusion matrix must be square");
    Metrics m;
    m.confusion = std::move(confusion);
    const double total = static_cast<double>(m.total());
    m.ca.assign(c, 0.0);
    if (total == 0.0) return m;

    // Integer form of (OA - p_e)/(1 - p_e): (N*trace - sum row*col) / (N^2 - sum row*col).
    using Wide = unsigned __int128;
    Wide trace = 0, chance = 0;
    for (std::size_t i = 0; i < c; ++i) {
        std::uint64_t row = 0, col = 0;
        for (std::size_t j = 0; j < c; ++j) {
            row += m.confusion[i][j];
            col += m.confusion[j][i];
        }
        trace += m.confusion[i][i];
        chance += Wide(row) * col;
        if (row > 0) m.ca[i] = static_cast<double>(m.confusion[i][i]) / static_cast<double>(row);
    }
    const Wide n = m.total();
    m.oa = static_cast<double>(trace) / total;
    const Wide denom = n * n - chance;
    if (denom == 0) {
        m.kappa = trace == n ? 1.0 : 0.0;
    } else {
        const Wide agree = n * trace;
        const double num = agree >= chance ? static_cast<double>(agree - chance) : -static_cast<double>(chance - agree);
        m.kappa = num / static_cast<double>(denom);
    }
    return m;
}

void add_prediction(std::vector<std::vector<std::uint64_t>>& confusion, std::size_t truth, std::size_t predicted) {
    if (truth >= confusion.size() || predicted >= confusion.size()) {
        throw std::out_of_range("class index outside the confusion matrix");
    }
    ++confusion[truth][predicted];
}

std::string metrics_to_json(const Metrics& m) {
    nlohmann::ordered_json j;
    j["oa"] = m.oa;
    j["kappa"] = m.kappa;
    j["ca"] = m.ca;
    j["confusion"] = m.confusion;
    return j.dump(2) + "\n";
}

}  // namespace ldg::train
