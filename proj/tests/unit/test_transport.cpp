#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "cvfusion/error.hpp"
#include "cvfusion/transport.hpp"

using namespace cvfusion;

namespace {

std::vector<double> grid(int n, double step = 1.0) {
    std::vector<double> c(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) c[i] = i * step;
    return c;
}

Spectrum one_hot(int n, int bin, double step = 1.0) {
    std::vector<double> w(static_cast<std::size_t>(n), 0.0);
    w[bin] = 1.0;
    return normalize(w, grid(n, step));
}

Spectrum random_spectrum(int n, std::mt19937_64& gen, double step = 1.0) {
    std::uniform_real_distribution<double> dist(0.0, 1.0);
    std::vector<double> w(static_cast<std::size_t>(n));
    for (auto& v : w) v = dist(gen);
    return normalize(w, grid(n, step));
}

PointSet random_points(int n, std::mt19937_64& gen) {
    std::uniform_real_distribution<double> dist(-5.0, 5.0);
    PointSet p;
    for (int i = 0; i < n; ++i) p.points.push_back(dist(gen));
    return p;
}

ManifestEntry entry(const std::string& id, Binary ecg, Binary fundus, Split split) {
    ManifestEntry e;
    e.id = id;
    e.ecg_label = ecg;
    e.fundus_od_label = fundus;
    e.fundus_label = fundus;
    e.split = split;
    return e;
}

}  // namespace

// ---------------------------------------------------------------------------
// emd_1d

TEST(Emd1d, IdentityIsZero) {
    std::mt19937_64 gen(1);
    const auto p = random_spectrum(16, gen);
    EXPECT_EQ(emd_1d(p, p), 0.0);
}

TEST(Emd1d, SingleTransport) {
    EXPECT_NEAR(emd_1d(one_hot(10, 2, 0.5), one_hot(10, 7, 0.5)), 2.5, 1e-12);
}

TEST(Emd1d, ShiftedUniformPair) {
    const auto p = normalize({1, 1, 0}, {0, 1, 2});
    const auto q = normalize({0, 1, 1}, {0, 1, 2});
    EXPECT_NEAR(emd_1d(p, q), 1.0, 1e-12);
}

TEST(Emd1d, MismatchedGrids) {
    EXPECT_THROW(emd_1d(one_hot(4, 0), one_hot(5, 0)), ParamError);
    EXPECT_THROW(emd_1d(one_hot(4, 0), one_hot(4, 0, 2.0)), ParamError);
}

TEST(Emd1d, MetricAxioms) {
    std::mt19937_64 gen(2);
    for (int trial = 0; trial < 200; ++trial) {
        const auto p = random_spectrum(12, gen);
        const auto q = random_spectrum(12, gen);
        const auto r = random_spectrum(12, gen);
        const double pq = emd_1d(p, q);
        EXPECT_GE(pq, 0.0);
        EXPECT_NEAR(pq, emd_1d(q, p), 1e-12);
        EXPECT_LE(emd_1d(p, r), pq + emd_1d(q, r) + 1e-9);
        EXPECT_GT(pq, 1e-12);
    }
}

TEST(Emd1d, ScaleEquivariance) {
    std::mt19937_64 gen(3);
    for (double c : {0.1, 2.0, 37.5}) {
        auto p = random_spectrum(20, gen);
        auto q = random_spectrum(20, gen);
        const double base = emd_1d(p, q);
        for (auto& x : p.centers) x *= c;
        for (auto& x : q.centers) x *= c;
        EXPECT_NEAR(emd_1d(p, q), c * base, 1e-9 * c);
    }
}

// ---------------------------------------------------------------------------
// Brute force and point sets

TEST(EmdBruteforce, Examples) {
    EXPECT_NEAR(emd_bruteforce({{1, 2, 3}}, {{2, 3, 4}}), 3.0, 1e-12);
    EXPECT_EQ(emd_bruteforce({{4, -1, 2.5}}, {{4, -1, 2.5}}), 0.0);
    EXPECT_EQ(emd_bruteforce({{0}}, {{5}}), 5.0);
}

TEST(EmdBruteforce, Errors) {
    EXPECT_THROW(emd_bruteforce({{1, 2}}, {{1}}), ParamError);
    EXPECT_THROW(emd_bruteforce({{}}, {{}}), ParamError);
    EXPECT_THROW(emd_bruteforce({std::vector<double>(9, 0.0)}, {std::vector<double>(9, 1.0)}), ParamError);
}

TEST(EmdBruteforce, SortedMatchingIsOptimal) {
    std::mt19937_64 gen(4);
    for (int trial = 0; trial < 300; ++trial) {
        const int n = 1 + static_cast<int>(gen() % 7);
        const auto p = random_points(n, gen);
        const auto q = random_points(n, gen);
        EXPECT_NEAR(emd_bruteforce(p, q), sorted_matching_cost(p, q), 1e-9);
    }
}

TEST(EmdBruteforce, ClosedFormTimesNMatchesOracle) {
    std::mt19937_64 gen(5);
    for (int trial = 0; trial < 300; ++trial) {
        const int n = 1 + static_cast<int>(gen() % 7);
        const auto p = random_points(n, gen);
        const auto q = random_points(n, gen);
        const auto [dp, dq] = empirical_pair(p, q);
        EXPECT_NEAR(emd_1d(dp, dq) * n, emd_bruteforce(p, q), 1e-9);
    }
}

TEST(EmdBruteforce, EmpiricalPairHandlesTies) {
    const auto [dp, dq] = empirical_pair({{1, 1, 2}}, {{2, 2, 1}});
    EXPECT_EQ(dp.centers, (std::vector<double>{1, 2}));
    EXPECT_NEAR(dp.weights[0], 2.0 / 3.0, 1e-15);
    EXPECT_NEAR(dq.weights[0], 1.0 / 3.0, 1e-15);
    EXPECT_NEAR(emd_1d(dp, dq) * 3, emd_bruteforce({{1, 1, 2}}, {{2, 2, 1}}), 1e-12);
}

// ---------------------------------------------------------------------------
// Templates

class TemplateTest : public ::testing::Test {
protected:
    void SetUp() override {
        manifest.records = {entry("a", Binary::normal, Binary::normal, Split::train),
                            entry("b", Binary::abnormal, Binary::abnormal, Split::train),
                            entry("c", Binary::abnormal, Binary::normal, Split::train),
                            entry("t", Binary::normal, Binary::normal, Split::test)};
        spectra = {{"a", one_hot(4, 0), one_hot(4, 1)},
                   {"b", one_hot(4, 2), one_hot(4, 3)},
                   {"c", one_hot(4, 3), one_hot(4, 2)},
                   {"t", one_hot(4, 1), one_hot(4, 1)}};
    }
    DatasetManifest manifest;
    std::vector<RecordSpectra> spectra;
};

TEST_F(TemplateTest, GroupMeansFromTrainingOnly) {
    const auto bank = build_templates(manifest, spectra);
    EXPECT_EQ(bank.ecg_normal.weights, one_hot(4, 0).weights);
    EXPECT_EQ(bank.ecg_abnormal.weights, (std::vector<double>{0, 0, 0.5, 0.5}));
    EXPECT_EQ(bank.fundus_normal.weights, (std::vector<double>{0, 0.5, 0.5, 0}));
    EXPECT_EQ(bank.fundus_abnormal.weights, one_hot(4, 3).weights);
    EXPECT_EQ(bank.split, Split::train);
    EXPECT_EQ(std::count(bank.built_from.begin(), bank.built_from.end(), "t"), 0);
    EXPECT_EQ(bank.built_from.size(), 3u);
}

TEST_F(TemplateTest, IdenticalSpectraGiveSameTemplate) {
    manifest.records.push_back(entry("d", Binary::normal, Binary::normal, Split::train));
    spectra.push_back({"d", one_hot(4, 0), one_hot(4, 1)});
    const auto bank = build_templates(manifest, spectra);
    EXPECT_EQ(bank.ecg_normal.weights, one_hot(4, 0).weights);
}

TEST_F(TemplateTest, EmptyGroupIsNamed) {
    manifest.records[1].split = Split::test;
    manifest.records[2].split = Split::test;
    try {
        build_templates(manifest, spectra);
        FAIL() << "expected DataError";
    } catch (const DataError& e) {
        EXPECT_NE(std::string(e.what()).find("ecg/abnormal"), std::string::npos) << e.what();
    }
}

TEST_F(TemplateTest, JsonRoundTrip) {
    const auto bank = build_templates(manifest, spectra);
    const auto back = templates_from_json(templates_to_json(bank));
    EXPECT_EQ(back.ecg_abnormal.weights, bank.ecg_abnormal.weights);
    EXPECT_EQ(back.fundus_normal.centers, bank.fundus_normal.centers);
    EXPECT_EQ(back.built_from, bank.built_from);
    auto doc = templates_to_json(bank);
    doc["split"] = "test";
    EXPECT_THROW(templates_from_json(doc), FormatError);
    EXPECT_THROW(templates_from_json(nlohmann::json::array()), FormatError);
}

// ---------------------------------------------------------------------------
// Features

TEST(EmdFeatures, OneHotDistances) {
    TemplateBank bank{one_hot(8, 0), one_hot(8, 5), one_hot(8, 1), one_hot(8, 7), {}, Split::train};
    const auto f = emd_features(one_hot(8, 2), one_hot(8, 3), bank);
    EXPECT_EQ(f, (std::vector<double>{2, 3, 2, 4}));
    const auto two = emd_features(one_hot(8, 2), one_hot(8, 3), bank, EmdRefs::normal_only);
    EXPECT_EQ(two, (std::vector<double>{2, 2}));
    EXPECT_EQ(emd_feature_names(EmdRefs::normal_only).size(), 2u);
    EXPECT_EQ(emd_feature_names(), (std::vector<std::string>{"emd_ecg_normal", "emd_ecg_abnormal",
                                                            "emd_fundus_normal", "emd_fundus_abnormal"}));
}

TEST(EmdFeatures, IdenticalSpectraGiveZeros) {
    std::mt19937_64 gen(6);
    const auto s = random_spectrum(8, gen);
    TemplateBank bank{s, s, s, s, {}, Split::train};
    EXPECT_EQ(emd_features(s, s, bank), (std::vector<double>{0, 0, 0, 0}));
}

TEST(EmdFeatures, GridMismatch) {
    TemplateBank bank{one_hot(8, 0), one_hot(8, 5), one_hot(8, 1), one_hot(8, 7), {}, Split::train};
    EXPECT_THROW(emd_features(one_hot(6, 2), one_hot(8, 3), bank), ParamError);
}

TEST(EmdRefsToken, Parse) {
    EXPECT_EQ(parse_emd_refs("normal-only"), EmdRefs::normal_only);
    EXPECT_EQ(parse_emd_refs("both"), EmdRefs::both);
    EXPECT_THROW(parse_emd_refs("neither"), ParamError);
}
