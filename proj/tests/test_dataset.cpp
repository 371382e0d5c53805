#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <gtest/gtest.h>

#include "cohlab/dataset.hpp"

using namespace cohlab;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("cohlab_test_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    std::stringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

} // namespace

TEST(LabelOf, Intervals) {
    EXPECT_EQ(label_of(0.0), 0);
    EXPECT_EQ(label_of(0.10), 0);
    EXPECT_EQ(label_of(0.25), 1);
    EXPECT_EQ(label_of(0.4999), 1);
    EXPECT_EQ(label_of(0.50), 2);
    EXPECT_EQ(label_of(0.75), 3);
    EXPECT_EQ(label_of(1.0), 3);
    EXPECT_THROW(label_of(-0.01), DomainError);
    EXPECT_THROW(label_of(1.01), DomainError);
}

TEST(Generate, ForcedHotCoherenceGivesOneSamplePerClass) {
    GenerateOptions o;
    o.forced_p_h = std::vector<double>{0.1, 0.3, 0.6, 0.9};
    const auto ds = generate(4, ParamRanges{}, 5, o);
    ASSERT_EQ(ds.size(), 4u);
    for (int i = 0; i < 4; ++i) {
        EXPECT_EQ(ds.samples[i].label, i);
        EXPECT_EQ(ds.samples[i].params.p_h, (*o.forced_p_h)[i]);
    }
}

TEST(Generate, SamplesRespectRangesAndLabels) {
    const ParamRanges r;
    const auto ds = generate(300, r, 17);
    for (const auto& s : ds.samples) {
        EXPECT_EQ(s.label, label_of(s.params.p_h));
        EXPECT_GE(s.params.t_c, r.t_c.lo);
        EXPECT_LE(s.params.t_c, r.t_c.hi);
        EXPECT_GE(s.params.t_h, r.t_h.lo);
        EXPECT_LE(s.params.t_h, r.t_h.hi);
        EXPECT_GE(s.params.t_l, r.t_l.lo);
        EXPECT_LE(s.params.t_l, r.t_l.hi);
        for (double c : s.features) EXPECT_TRUE(std::isfinite(c));
        EXPECT_EQ(s.params.e_a, 3.0);
    }
}

TEST(Generate, SplitIsSeventyThirtyPartition) {
    const auto ds = generate(1000, ParamRanges{}, 3);
    const auto tr = ds.indices(Split::train), va = ds.indices(Split::validation);
    EXPECT_EQ(tr.size(), 700u);
    EXPECT_EQ(va.size(), 300u);
    std::set<std::size_t> all(tr.begin(), tr.end());
    for (auto i : va) EXPECT_TRUE(all.insert(i).second);
    EXPECT_EQ(all.size(), 1000u);
}

TEST(Generate, PrefixStableAcrossSizes) {
    const auto a = generate(50, ParamRanges{}, 21);
    const auto b = generate(120, ParamRanges{}, 21);
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a.samples[i], b.samples[i]);
}

TEST(Generate, DeterministicCsvBytes) {
    const auto dir = temp_dir("det");
    write_csv(generate(200, ParamRanges{}, 8), dir / "a.csv");
    write_csv(generate(200, ParamRanges{}, 8), dir / "b.csv");
    EXPECT_EQ(slurp(dir / "a.csv"), slurp(dir / "b.csv"));
    write_csv(generate(200, ParamRanges{}, 9), dir / "c.csv");
    EXPECT_NE(slurp(dir / "a.csv"), slurp(dir / "c.csv"));
}

TEST(Generate, PathologicalRangesRaiseQualityError) {
    ParamRanges r;
    r.t_c = {3.0, 3.0};
    r.t_h = {3.0, 3.0};
    r.t_l = {3.0, 3.0}; // zero bias everywhere: every baseline flux vanishes
    EXPECT_THROW(generate(5, r, 1), GenerationQualityError);
}

TEST(Generate, RejectsBadArguments) {
    EXPECT_THROW(generate(0, ParamRanges{}, 1), DomainError);
    ParamRanges r;
    r.p_h = {0.5, 1.2};
    EXPECT_THROW(generate(3, r, 1), DomainError);
    GenerateOptions o;
    o.forced_p_h = std::vector<double>{0.1};
    EXPECT_THROW(generate(3, ParamRanges{}, 1, o), DomainError);
}

TEST(Csv, RoundTripIncludingMeta) {
    const auto dir = temp_dir("rt");
    const auto ds = generate(150, ParamRanges{}, 4);
    write_csv(ds, dir / "d.csv");
    EXPECT_TRUE(fs::exists(dir / "d.meta.json"));
    EXPECT_EQ(read_csv(dir / "d.csv"), ds);
}

TEST(Csv, EmptyDatasetIsHeaderOnly) {
    const auto dir = temp_dir("empty");
    Dataset ds;
    write_csv(ds, dir / "e.csv");
    EXPECT_EQ(slurp(dir / "e.csv"), std::string(kCsvHeader) + "\n");
    EXPECT_EQ(read_csv(dir / "e.csv"), ds);
}

TEST(Csv, ThreeSampleSchema) {
    const auto dir = temp_dir("three");
    write_csv(generate(3, ParamRanges{}, 2), dir / "t.csv");
    std::ifstream is(dir / "t.csv");
    std::string line;
    std::getline(is, line);
    EXPECT_EQ(line, kCsvHeader);
    int rows = 0;
    while (std::getline(is, line)) {
        ++rows;
        EXPECT_EQ(std::count(line.begin(), line.end(), ','), 10);
    }
    EXPECT_EQ(rows, 3);
}

TEST(Csv, MalformedInputReportsLine) {
    const auto ds = generate(3, ParamRanges{}, 2);
    std::ostringstream os;
    write_csv_stream(ds, os);
    std::string text = os.str();
    // Corrupt the third line (second data row).
    std::size_t pos = text.find('\n');
    pos = text.find('\n', pos + 1);
    text.insert(pos + 1, "x");
    std::istringstream is(text);
    try {
        read_csv_stream(is, ds.meta);
        FAIL() << "expected ParseError";
    } catch (const ParseError& e) {
        EXPECT_EQ(e.line(), 3u);
    }
}

TEST(Csv, InconsistentLabelRejected) {
    const auto ds = generate(2, ParamRanges{}, 2);
    std::ostringstream os;
    write_csv_stream(ds, os);
    std::string text = os.str();
    const int bad = (ds.samples[0].label + 1) % 4;
    // label is the fifth field of the first data row
    std::size_t start = text.find('\n') + 1;
    for (int f = 0; f < 4; ++f) start = text.find(',', start) + 1;
    text[start] = static_cast<char>('0' + bad);
    std::istringstream is(text);
    EXPECT_THROW(read_csv_stream(is, ds.meta), ParseError);
}

TEST(Csv, MissingSidecarFallsBackToDefaults) {
    const auto dir = temp_dir("nometa");
    const auto ds = generate(2, ParamRanges{}, 2);
    write_csv(ds, dir / "n.csv");
    fs::remove(dir / "n.meta.json");
    const auto back = read_csv(dir / "n.csv");
    EXPECT_EQ(back.samples, ds.samples);
    EXPECT_EQ(back.split, ds.split);
    EXPECT_THROW(read_csv(dir / "absent.csv"), DomainError);
}
