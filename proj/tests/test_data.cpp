#include "cytocoset/csv.hpp"
#include "cytocoset/data.hpp"
#include "fixtures.hpp"

#include <gtest/gtest.h>

#include <functional>
#include <set>

using namespace cytocoset;

namespace {

std::filesystem::path write_file(const std::filesystem::path& dir, const std::string& name, const std::string& text) {
    auto path = dir / name;
    csv::write_text(path, text);
    return path;
}

std::string error_of(const std::function<void()>& fn) {
    try {
        fn();
    } catch (const DataError& e) {
        return e.what();
    }
    return "";
}

CohortDataset cohort_with_ages(const std::vector<double>& ages, const std::vector<int>& outcomes) {
    std::vector<Sample> samples;
    for (std::size_t i = 0; i < ages.size(); ++i) {
        Sample s;
        s.record.sample_id = "s" + std::to_string(i);
        s.record.outcome = outcomes[i];
        s.record.covariates["age"] = CovariateValue::continuous(ages[i]);
        s.record.covariates["sex"] = CovariateValue::binary(static_cast<int>(i % 2));
        s.cells.sample_id = s.record.sample_id;
        s.cells.markers = {"m1"};
        s.cells.values = RowMatrix::Constant(2, 1, static_cast<double>(i));
        samples.push_back(std::move(s));
    }
    return CohortDataset::make(std::move(samples));
}

}

TEST(LoadCellMatrix, ParsesHeaderAndRows) {
    auto dir = fixtures::temp_dir("load_cells");
    auto m = load_cell_matrix(write_file(dir, "a.csv", "m1,m2\n0,0\n1,2\n"), "a");
    EXPECT_EQ(m.num_cells(), 2);
    EXPECT_EQ(m.num_markers(), 2);
    EXPECT_EQ(m.markers, (std::vector<std::string>{"m1", "m2"}));
    EXPECT_EQ(m.values(1, 1), 2.0);
}

TEST(LoadCellMatrix, ReportsErrorsWithLocation) {
    auto dir = fixtures::temp_dir("load_cells_err");
    EXPECT_NE(error_of([&] { load_cell_matrix(write_file(dir, "h.csv", "m1,m2\n"), "h"); }).find("empty body"), std::string::npos);
    auto bad = error_of([&] { load_cell_matrix(write_file(dir, "b.csv", "m1,m2\n1,abc\n"), "b"); });
    EXPECT_NE(bad.find("row 2"), std::string::npos) << bad;
    EXPECT_NE(bad.find("column 2"), std::string::npos) << bad;
    EXPECT_NE(error_of([&] { load_cell_matrix(write_file(dir, "r.csv", "m1,m2\n1,2\n3\n"), "r"); }).find("ragged row 3"),
              std::string::npos);
    EXPECT_NE(error_of([&] { load_cell_matrix(dir / "missing.csv", "x"); }).find("missing.csv"), std::string::npos);
    EXPECT_NE(error_of([&] { load_cell_matrix(write_file(dir, "d.csv", "m1,m1\n1,2\n"), "d"); }).find("duplicate marker"),
              std::string::npos);
    EXPECT_FALSE(error_of([&] { load_cell_matrix(write_file(dir, "n.csv", "m1\nnan\n"), "n"); }).empty());
}

TEST(LoadCellMatrix, RoundTripIsBitExact) {
    auto dir = fixtures::temp_dir("roundtrip");
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 20; ++trial) {
        CellMatrix m;
        m.sample_id = "x";
        m.markers = {"a", "b", "c"};
        m.values = fixtures::random_matrix(17, 3, rng, std::pow(10.0, trial % 7 - 3));
        write_cell_matrix(dir / "rt.csv", m);
        auto back = load_cell_matrix(dir / "rt.csv", "x");
        ASSERT_EQ(back.markers, m.markers);
        ASSERT_TRUE(back.values == m.values);
    }
}

TEST(LoadManifest, TypesCovariates) {
    auto dir = fixtures::temp_dir("manifest");
    auto recs = load_manifest(write_file(dir, "m.csv",
                                         "sample_id,cells_path,outcome,age,treated\n"
                                         "a,a.csv,0,25,0\nb,b.csv,1,31,1\nc,c.csv,1,40,1\n"));
    ASSERT_EQ(recs.size(), 3u);
    EXPECT_EQ(recs[0].outcome, 0);
    EXPECT_EQ(recs[2].outcome, 1);
    EXPECT_EQ(recs[1].covariates.at("age").kind, CovariateValue::Kind::Continuous);
    EXPECT_FALSE(recs[1].covariates.at("age").binarized.has_value());
    EXPECT_EQ(recs[1].covariates.at("treated").kind, CovariateValue::Kind::Binary);
    EXPECT_EQ(*recs[1].covariates.at("treated").binarized, 1);
}

TEST(LoadManifest, RejectsDuplicatesAndBadOutcomes) {
    auto dir = fixtures::temp_dir("manifest_err");
    EXPECT_NE(error_of([&] {
                  load_manifest(write_file(dir, "d.csv", "sample_id,cells_path,outcome\ns1,a.csv,0\ns1,b.csv,1\n"));
              }).find("duplicate sample_id"),
              std::string::npos);
    EXPECT_NE(error_of([&] { load_manifest(write_file(dir, "o.csv", "sample_id,cells_path,outcome\ns1,a.csv,2\n")); })
                  .find("not 0 or 1"),
              std::string::npos);
}

TEST(LoadCohort, ResolvesRelativePathsAndReportsUnreadableCells) {
    auto dir = fixtures::temp_dir("cohort");
    write_file(dir, "cells/a.csv", "m1,m2\n1,2\n");
    write_file(dir, "cells/b.csv", "m1,m2\n3,4\n5,6\n");
    auto cohort = load_cohort(write_file(dir, "manifest.csv", "sample_id,cells_path,outcome\na,cells/a.csv,0\nb,cells/b.csv,1\n"));
    EXPECT_EQ(cohort.size(), 2u);
    EXPECT_EQ(cohort.at(cohort.index_of("b")).cells.num_cells(), 2);

    write_file(dir, "bad.csv", "sample_id,cells_path,outcome\na,cells/zzz.csv,0\n");
    EXPECT_NE(error_of([&] { load_cohort(dir / "bad.csv"); }).find("zzz.csv"), std::string::npos);

    write_file(dir, "cells/c.csv", "m2,m1\n1,2\n");
    write_file(dir, "panel.csv", "sample_id,cells_path,outcome\na,cells/a.csv,0\nc,cells/c.csv,1\n");
    EXPECT_NE(error_of([&] { load_cohort(dir / "panel.csv"); }).find("marker panel"), std::string::npos);
}

TEST(BinarizeCovariate, MedianRuleIsStrict) {
    auto c = binarize_covariate(cohort_with_ages({20, 30, 40}, {0, 1, 0}), "age", BinarizeRule::median());
    std::vector<int> got;
    for (const auto& s : c.samples()) {
        got.push_back(binarized_covariate(s.record, "age"));
    }
    EXPECT_EQ(got, (std::vector<int>{0, 0, 1}));

    auto ties = binarize_covariate(cohort_with_ages({25, 25}, {0, 1}), "age", BinarizeRule::median());
    EXPECT_EQ(binarized_covariate(ties.at(0).record, "age"), 0);
    EXPECT_EQ(binarized_covariate(ties.at(1).record, "age"), 0);

    auto thr = binarize_covariate(cohort_with_ages({20, 30, 40}, {0, 1, 0}), "age", BinarizeRule::at(20));
    EXPECT_EQ(binarized_covariate(thr.at(0).record, "age"), 0);
    EXPECT_EQ(binarized_covariate(thr.at(1).record, "age"), 1);
}

TEST(BinarizeCovariate, BinaryPassesThroughAndIsIdempotent) {
    auto base = cohort_with_ages({20, 30, 40, 50}, {0, 1, 0, 1});
    auto once = binarize_covariate(base, "sex", BinarizeRule::median());
    for (std::size_t i = 0; i < base.size(); ++i) {
        EXPECT_EQ(binarized_covariate(once.at(i).record, "sex"), static_cast<int>(i % 2));
    }
    auto a1 = binarize_covariate(base, "age", BinarizeRule::median());
    auto a2 = binarize_covariate(a1, "age", BinarizeRule::median());
    for (std::size_t i = 0; i < base.size(); ++i) {
        EXPECT_EQ(binarized_covariate(a1.at(i).record, "age"), binarized_covariate(a2.at(i).record, "age"));
    }
}

TEST(BinarizeCovariate, MissingCovariateIsAnError) {
    auto c = cohort_with_ages({20, 30}, {0, 1});
    EXPECT_THROW(binarize_covariate(c, "bmi", BinarizeRule::median()), DataError);
    EXPECT_THROW(binarized_covariate(c.at(0).record, "age"), DataError);
}

TEST(SubsampleSet, WithoutReplacementWhenEnoughCells) {
    CellMatrix m;
    m.sample_id = "x";
    m.markers = {"i"};
    m.values.resize(1000, 1);
    for (int r = 0; r < 1000; ++r) {
        m.values(r, 0) = r;
    }
    auto s = subsample_set(m, 256, 3);
    ASSERT_EQ(s.num_cells(), 256);
    std::set<double> distinct;
    for (int r = 0; r < 256; ++r) {
        distinct.insert(s.values(r, 0));
    }
    EXPECT_EQ(distinct.size(), 256u);
    EXPECT_TRUE(subsample_set(m, 256, 3).values == s.values);
    EXPECT_FALSE(subsample_set(m, 256, 4).values == s.values);
    EXPECT_EQ(subsample_set(m, 1000, 9).num_cells(), 1000);
}

TEST(SubsampleSet, WithReplacementWhenTooFewCells) {
    CellMatrix m;
    m.sample_id = "x";
    m.markers = {"i"};
    m.values.resize(10, 1);
    for (int r = 0; r < 10; ++r) {
        m.values(r, 0) = r;
    }
    auto s = subsample_set(m, 32, 1);
    EXPECT_EQ(s.num_cells(), 32);
    for (int r = 0; r < 32; ++r) {
        EXPECT_GE(s.values(r, 0), 0);
        EXPECT_LT(s.values(r, 0), 10);
    }
    EXPECT_THROW(subsample_set(m, 0, 1), DataError);
}

TEST(StratifiedSplits, ExactStratification) {
    auto cohort = cohort_with_ages({1, 2, 3, 4, 5, 6, 7, 8, 9, 10}, {0, 1, 0, 1, 0, 1, 0, 1, 0, 1});
    auto plans = stratified_splits(cohort, 1, 0.2, 11);
    ASSERT_EQ(plans.size(), 1u);
    const auto& p = plans[0];
    EXPECT_EQ(p.train_ids.size(), 8u);
    EXPECT_EQ(p.test_ids.size(), 2u);
    int test_pos = 0;
    for (const auto& id : p.test_ids) {
        test_pos += cohort.at(cohort.index_of(id)).record.outcome;
    }
    EXPECT_EQ(test_pos, 1);
}

TEST(StratifiedSplits, PartitionPropertyAndDistinctTrials) {
    std::vector<double> ages(23);
    std::vector<int> outcomes(23);
    for (int i = 0; i < 23; ++i) {
        ages[i] = i;
        outcomes[i] = i < 9 ? 1 : 0;
    }
    auto cohort = cohort_with_ages(ages, outcomes);
    auto plans = stratified_splits(cohort, 30, 0.25, 5);
    ASSERT_EQ(plans.size(), 30u);
    std::set<std::vector<std::string>> tests;
    for (const auto& p : plans) {
        std::set<std::string> train(p.train_ids.begin(), p.train_ids.end());
        std::set<std::string> test(p.test_ids.begin(), p.test_ids.end());
        std::set<std::string> all = train;
        all.insert(test.begin(), test.end());
        EXPECT_EQ(all.size(), cohort.size());
        EXPECT_EQ(train.size() + test.size(), cohort.size());
        int train_pos = 0;
        for (const auto& id : p.train_ids) {
            train_pos += cohort.at(cohort.index_of(id)).record.outcome;
        }
        // Cohort has 9/23 positives; train share must match within one sample.
        EXPECT_LE(std::fabs(train_pos - 9.0 / 23.0 * static_cast<double>(train.size())), 1.0);
        tests.insert(p.test_ids);
    }
    EXPECT_EQ(tests.size(), 30u);

    auto again = stratified_splits(cohort, 30, 0.25, 5);
    for (std::size_t t = 0; t < plans.size(); ++t) {
        EXPECT_EQ(again[t].test_ids, plans[t].test_ids);
    }
}

TEST(StratifiedSplits, ShorterRunIsPrefixOfLongerRun) {
    std::vector<double> ages(16);
    std::vector<int> outcomes(16);
    for (int i = 0; i < 16; ++i) {
        ages[i] = i;
        outcomes[i] = i % 2;
    }
    auto cohort = cohort_with_ages(ages, outcomes);
    auto full = stratified_splits(cohort, 30, 0.25, 9);
    for (int n : {1, 5, 29}) {
        auto part = stratified_splits(cohort, n, 0.25, 9);
        for (int t = 0; t < n; ++t) {
            EXPECT_EQ(part[t].test_ids, full[t].test_ids);
        }
    }
    // Only 4 distinct test sets exist here: the first 4 plans use all of them.
    auto tiny = cohort_with_ages({1, 2, 3, 4}, {0, 0, 1, 1});
    auto plans = stratified_splits(tiny, 6, 0.5, 3);
    std::set<std::vector<std::string>> first4;
    for (int t = 0; t < 4; ++t) {
        first4.insert(plans[t].test_ids);
    }
    EXPECT_EQ(first4.size(), 4u);
    EXPECT_EQ(stratified_splits(tiny, 2, 0.5, 3)[1].test_ids, plans[1].test_ids);
}

TEST(StratifiedSplits, RejectsTinyClasses) {
    auto cohort = cohort_with_ages({1, 2, 3}, {0, 0, 1});
    EXPECT_THROW(stratified_splits(cohort, 1, 0.3, 0), DataError);
    auto ok = cohort_with_ages({1, 2, 3, 4}, {0, 0, 1, 1});
    EXPECT_THROW(stratified_splits(ok, 1, 0.0, 0), DataError);
    EXPECT_THROW(stratified_splits(ok, 1, 1.0, 0), DataError);
}
