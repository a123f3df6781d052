#pragma once

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cvfusion/dataio.hpp"
#include "cvfusion/spectral.hpp"

namespace cvfusion {

// Equal-mass points on the real line.
struct PointSet {
    std::vector<double> points;
};

/// Earth Mover's Distance between two distributions on the same grid via
/// the 1D closed form sum_i |CDF_P(i) - CDF_Q(i)| * (c[i+1] - c[i]); the
/// final gap reuses the previous spacing. Throws ParamError when the
/// grids differ.
double emd_1d(const Spectrum& p, const Spectrum& q);

/// Minimal-bijection cost min_phi sum |x - phi(x)| by enumerating all
/// permutations. Exponential; intended as a reference for sizes <= 8.
/// Throws ParamError on size mismatch, empty sets, or size > 8.
double emd_bruteforce(const PointSet& p, const PointSet& q);

// Cost of pairing the i-th smallest of p with the i-th smallest of q.
double sorted_matching_cost(const PointSet& p, const PointSet& q);

/// Empirical distributions of two point sets on the sorted union of their
/// values; each point carries mass 1/n.
std::pair<Spectrum, Spectrum> empirical_pair(const PointSet& p, const PointSet& q);

// Per-(modality, label) reference spectra built from the training split.
struct TemplateBank {
    Spectrum ecg_normal;
    Spectrum ecg_abnormal;
    Spectrum fundus_normal;
    Spectrum fundus_abnormal;
    std::vector<std::string> built_from;
    Split split = Split::train;
};

struct RecordSpectra {
    std::string id;
    Spectrum ecg;
    Spectrum fundus;
};

/// Element-wise mean of each group's spectra (renormalized), using only the
/// manifest's training records. Throws DataError naming any empty group.
TemplateBank build_templates(const DatasetManifest& manifest, const std::vector<RecordSpectra>& spectra);

// Which references each modality is compared against.
enum class EmdRefs { both, normal_only };

std::string_view to_string(EmdRefs refs);
EmdRefs parse_emd_refs(std::string_view token);

/// both:        [ecg vs ecg_normal, ecg vs ecg_abnormal,
///               fundus vs fundus_normal, fundus vs fundus_abnormal]
/// normal_only: [ecg vs ecg_normal, fundus vs fundus_normal]
std::vector<double> emd_features(const Spectrum& ecg, const Spectrum& fundus, const TemplateBank& bank,
                                 EmdRefs refs = EmdRefs::both);
std::vector<std::string> emd_feature_names(EmdRefs refs = EmdRefs::both);

nlohmann::json templates_to_json(const TemplateBank& bank);
// Throws FormatError on schema violations.
TemplateBank templates_from_json(const nlohmann::json& doc);

}  // namespace cvfusion
