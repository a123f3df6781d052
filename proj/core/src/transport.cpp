#include "cvfusion/transport.hpp"

#include "cvfusion/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

namespace cvfusion {

namespace {

void require_same_grid(const Spectrum& p, const Spectrum& q) {
    if (p.centers.size() != q.centers.size() || p.weights.size() != p.centers.size() ||
        q.weights.size() != q.centers.size()) {
        throw ParamError("emd: distributions are defined on different grids");
    }
    for (std::size_t i = 0; i < p.centers.size(); ++i) {
        const double scale = std::max({1.0, std::abs(p.centers[i]), std::abs(q.centers[i])});
        if (std::abs(p.centers[i] - q.centers[i]) > 1e-12 * scale) {
            throw ParamError("emd: distributions are defined on different grids");
        }
    }
}

}  // namespace

double emd_1d(const Spectrum& p, const Spectrum& q) {
    require_same_grid(p, q);
    const std::size_t n = p.centers.size();
    if (n < 2) return 0.0;
    double cdf_p = 0.0;
    double cdf_q = 0.0;
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        cdf_p += p.weights[i];
        cdf_q += q.weights[i];
        const double gap = i + 1 < n ? p.centers[i + 1] - p.centers[i] : p.centers[n - 1] - p.centers[n - 2];
        total += std::abs(cdf_p - cdf_q) * gap;
    }
    return total;
}

double emd_bruteforce(const PointSet& p, const PointSet& q) {
    const std::size_t n = p.points.size();
    if (n == 0 || n != q.points.size()) throw ParamError("emd_bruteforce: point sets must be non-empty and equal size");
    if (n > 8) throw ParamError("emd_bruteforce: at most 8 points");
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    double best = std::numeric_limits<double>::infinity();
    do {
        double cost = 0.0;
        for (std::size_t i = 0; i < n; ++i) cost += std::abs(p.points[i] - q.points[perm[i]]);
        best = std::min(best, cost);
    } while (std::next_permutation(perm.begin(), perm.end()));
    return best;
}

double sorted_matching_cost(const PointSet& p, const PointSet& q) {
    if (p.points.size() != q.points.size()) throw ParamError("sorted_matching_cost: size mismatch");
    auto a = p.points;
    auto b = q.points;
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    double cost = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) cost += std::abs(a[i] - b[i]);
    return cost;
}

std::pair<Spectrum, Spectrum> empirical_pair(const PointSet& p, const PointSet& q) {
    if (p.points.empty() || q.points.empty()) throw ParamError("empirical_pair: empty point set");
    std::vector<double> grid = p.points;
    grid.insert(grid.end(), q.points.begin(), q.points.end());
    std::sort(grid.begin(), grid.end());
    grid.erase(std::unique(grid.begin(), grid.end()), grid.end());

    auto histogram = [&grid](const std::vector<double>& pts) {
        std::vector<double> w(grid.size(), 0.0);
        for (double x : pts) {
            const auto it = std::lower_bound(grid.begin(), grid.end(), x);
            w[static_cast<std::size_t>(it - grid.begin())] += 1.0;
        }
        return w;
    };
    return {normalize(histogram(p.points), grid), normalize(histogram(q.points), grid)};
}

TemplateBank build_templates(const DatasetManifest& manifest, const std::vector<RecordSpectra>& spectra) {
    std::map<std::string, const RecordSpectra*> by_id;
    for (const auto& s : spectra) by_id[s.id] = &s;

    struct Group {
        const char* name;
        std::vector<const Spectrum*> members;
    };
    Group ecg_n{"ecg/normal", {}}, ecg_a{"ecg/abnormal", {}}, fun_n{"fundus/normal", {}}, fun_a{"fundus/abnormal", {}};

    TemplateBank bank;
    for (const auto& e : manifest.records) {
        if (e.split != Split::train) continue;
        const auto it = by_id.find(e.id);
        if (it == by_id.end()) throw DataError("build_templates: no spectra for training record '" + e.id + "'");
        bank.built_from.push_back(e.id);
        (e.ecg_label == Binary::normal ? ecg_n : ecg_a).members.push_back(&it->second->ecg);
        (e.fundus_label == Binary::normal ? fun_n : fun_a).members.push_back(&it->second->fundus);
    }

    auto mean_of = [](const Group& g) {
        if (g.members.empty()) {
            throw DataError(std::string("build_templates: training group ") + g.name + " is empty");
        }
        const auto& first = *g.members.front();
        std::vector<double> sum(first.weights.size(), 0.0);
        for (const Spectrum* s : g.members) {
            require_same_grid(first, *s);
            for (std::size_t i = 0; i < sum.size(); ++i) sum[i] += s->weights[i];
        }
        for (double& v : sum) v /= static_cast<double>(g.members.size());
        return normalize(std::move(sum), first.centers);
    };
    bank.ecg_normal = mean_of(ecg_n);
    bank.ecg_abnormal = mean_of(ecg_a);
    bank.fundus_normal = mean_of(fun_n);
    bank.fundus_abnormal = mean_of(fun_a);
    return bank;
}

std::string_view to_string(EmdRefs refs) { return refs == EmdRefs::both ? "both" : "normal-only"; }

EmdRefs parse_emd_refs(std::string_view token) {
    if (token == "both") return EmdRefs::both;
    if (token == "normal-only") return EmdRefs::normal_only;
    throw ParamError("unknown EMD reference mode '" + std::string(token) + "'");
}

std::vector<double> emd_features(const Spectrum& ecg, const Spectrum& fundus, const TemplateBank& bank, EmdRefs refs) {
    if (refs == EmdRefs::normal_only) {
        return {emd_1d(ecg, bank.ecg_normal), emd_1d(fundus, bank.fundus_normal)};
    }
    return {emd_1d(ecg, bank.ecg_normal), emd_1d(ecg, bank.ecg_abnormal), emd_1d(fundus, bank.fundus_normal),
            emd_1d(fundus, bank.fundus_abnormal)};
}

std::vector<std::string> emd_feature_names(EmdRefs refs) {
    if (refs == EmdRefs::normal_only) return {"emd_ecg_normal", "emd_fundus_normal"};
    return {"emd_ecg_normal", "emd_ecg_abnormal", "emd_fundus_normal", "emd_fundus_abnormal"};
}

namespace {

nlohmann::json spectrum_json(const Spectrum& s) { return {{"weights", s.weights}, {"centers", s.centers}}; }

Spectrum spectrum_from(const nlohmann::json& doc, const char* key) {
    try {
        const auto& s = doc.at(key);
        Spectrum out{s.at("weights").get<std::vector<double>>(), s.at("centers").get<std::vector<double>>(), false};
        validate(out);
        return out;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("templates: bad '") + key + "': " + e.what());
    } catch (const ParamError& e) {
        throw FormatError(std::string("templates: bad '") + key + "': " + e.what());
    }
}

}  // namespace

nlohmann::json templates_to_json(const TemplateBank& bank) {
    // Weights are kept at full precision; the file is a model input, not a report.
    return {{"ecg_normal", spectrum_json(bank.ecg_normal)},
            {"ecg_abnormal", spectrum_json(bank.ecg_abnormal)},
            {"fundus_normal", spectrum_json(bank.fundus_normal)},
            {"fundus_abnormal", spectrum_json(bank.fundus_abnormal)},
            {"built_from", bank.built_from},
            {"split", std::string(to_string(bank.split))}};
}

TemplateBank templates_from_json(const nlohmann::json& doc) {
    if (!doc.is_object()) throw FormatError("templates: expected an object");
    TemplateBank bank;
    bank.ecg_normal = spectrum_from(doc, "ecg_normal");
    bank.ecg_abnormal = spectrum_from(doc, "ecg_abnormal");
    bank.fundus_normal = spectrum_from(doc, "fundus_normal");
    bank.fundus_abnormal = spectrum_from(doc, "fundus_abnormal");
    try {
        bank.built_from = doc.at("built_from").get<std::vector<std::string>>();
        if (doc.at("split").get<std::string>() != "train") throw FormatError("templates: must be built from train split");
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("templates: ") + e.what());
    }
    return bank;
}

}  // namespace cvfusion
