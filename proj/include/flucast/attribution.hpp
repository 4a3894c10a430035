#ifndef FLUCAST_ATTRIBUTION_HPP
#define FLUCAST_ATTRIBUTION_HPP

#include <cstddef>
#include <string>
#include <vector>

namespace flucast {

/// Per-feature importance values for one model/location/horizon:
/// regression coefficients, impurity importances, or saliency. Saliency
/// maps are step x channel matrices; tabular attributions have a single
/// row.
struct AttributionMap {
    std::string model_kind;
    std::string location;
    std::size_t horizon = 0;
    std::vector<std::string> row_labels;
    std::vector<std::string> col_labels;
    std::vector<std::vector<double>> values; // rows x cols
};

} // namespace flucast

#endif
