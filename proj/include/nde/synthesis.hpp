#pragma once

#include "nde/dataset.hpp"
#include "nde/haze.hpp"

#include <filesystem>
#include <vector>

namespace nde {

struct SynthesisOptions {
    double airlight = 1.0;
    std::vector<double> betas{0.08, 0.16};
    double depth_max = 10.0;  // metres represented by a depth value of 1
    NightParams night;
};

/// Builds a nighttime hazy corpus from `source`.
///
/// `source/clear/<id>.png` is required. For each beta the hazy daytime image
/// is synthesized from `source/depth/<id>.png` when present, otherwise read
/// from `source/hazy/<id>_<A>_<beta>.<ext>`; either way it is then darkened.
/// Writes `out/clear/<id>.png`, `out/hazy/<id>_<A>_<beta>.png` and returns
/// the manifest of `out` (unsplit).
Manifest synthesize_dataset(const std::filesystem::path& source, const std::filesystem::path& out,
                            const SynthesisOptions& options = {});

}  // namespace nde
