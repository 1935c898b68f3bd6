#pragma once

#include <optional>
#include <string>

#include "bandlime/explainer.hpp"
#include "bandlime/spectral.hpp"
#include "bandlime/stats.hpp"

namespace bandlime {

struct RenderSpec {
  std::string positive_color = "#2ca02c";
  std::string negative_color = "#d62728";
  bool annotate_weights = true;

  /// Throws InvalidArgument unless both colours are #rrggbb.
  void validate() const;
};

/// Log-magnitude heatmap of `spectrogram` (when given) with one horizontal
/// stripe per band. A stripe is tinted by the sign of its weight with opacity
/// |w| / max|w|; every band carries its weight as white text.
std::string render_explanation_svg(const Explanation& explanation,
                                   const std::optional<Spectrogram>& spectrogram,
                                   const RenderSpec& spec);

/// Bar chart of mean weights with +-1 std error bars. The plot group carries
/// data-zero-y and data-px-per-unit so bar geometry can be checked.
std::string render_aggregate_svg(const EmotionAggregate& aggregate, const RenderSpec& spec);

}  // namespace bandlime
