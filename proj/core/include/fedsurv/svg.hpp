#pragma once

#include "fedsurv/evaluation.hpp"

#include <string>
#include <vector>

namespace fedsurv {

/// Self-contained line plot of AUC(t) curves with CI bands and iAUC
/// reference lines; one series per report (first = green, second =
/// blue, then a fixed palette).
std::string auc_plot_svg(const std::vector<std::pair<std::string, const EvaluationReport*>>& series,
                         const std::string& title);

/// Bar plot of the parsimony curve (Psi against m).
std::string parsimony_plot_svg(const ParsimonyCurve& curve, const std::string& title);

}  // namespace fedsurv
