#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include <sys/wait.h>

#include <gtest/gtest.h>

namespace fs = std::filesystem;

namespace {

const fs::path& work() {
    static const fs::path p = [] {
        fs::path d = fs::temp_directory_path() / "cohlab_cli_test";
        fs::remove_all(d);
        fs::create_directories(d);
        return d;
    }();
    return p;
}

int run(const std::string& args) {
    const std::string cmd = std::string(COHLAB_CLI) + " " + args + " > " + (work() / "last.log").string() + " 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

void write(const fs::path& p, const std::string& s) {
    std::ofstream os(p);
    os << s;
}

std::string w(const std::string& name) { return (work() / name).string(); }

} // namespace

TEST(Cli, EndToEnd) {
    ASSERT_EQ(run("gen-data --n 400 --seed 3 --out " + w("d.csv")), 0);
    EXPECT_TRUE(fs::exists(work() / "d.csv"));
    EXPECT_TRUE(fs::exists(work() / "d.meta.json"));

    ASSERT_EQ(run("train --mapping f3 --data " + w("d.csv") + " --seed 3 --out " + w("run")), 0);
    EXPECT_TRUE(fs::exists(work() / "run" / "f3_model.json"));
    EXPECT_TRUE(fs::exists(work() / "run" / "f3_search.csv"));

    ASSERT_EQ(run("train --mapping f1 --untuned --k 3 --weighting distance --data " + w("d.csv") + " --out " +
                  w("run")),
              0);
    ASSERT_EQ(run("tune --mapping f2 --n-iter 4 --data " + w("d.csv") + " --out " + w("run")), 0);
    EXPECT_TRUE(fs::exists(work() / "run" / "f2_best.json"));

    ASSERT_EQ(run("evaluate --model " + w("run/f3_model.json") + " --data " + w("d.csv") + " --out " + w("run")), 0);
    EXPECT_TRUE(fs::exists(work() / "run" / "eval_classes.csv"));

    write(work() / "less.json", R"({"c12": "less", "n": 100, "seed": 1})");
    ASSERT_EQ(run("apply --model " + w("run/f3_model.json") + " --scenario " + w("less.json") + " --out " + w("run")), 0);
    EXPECT_TRUE(fs::exists(work() / "run" / "less_result.json"));

    ASSERT_EQ(run("sweep --sizes 200 300 --out " + w("sweep")), 0);
    EXPECT_TRUE(fs::exists(work() / "sweep" / "sweep.csv"));
    EXPECT_TRUE(fs::exists(work() / "sweep" / "sweep.dat"));

    EXPECT_EQ(run("oracle-check --draws 20"), 0);
}

TEST(Cli, ValidationErrorsExitTwo) {
    EXPECT_EQ(run(""), 2);
    EXPECT_EQ(run("train --mapping f9"), 2);
    EXPECT_EQ(run("evaluate --model /nonexistent.json --data /nonexistent.csv"), 2);
    write(work() / "bad.json", R"({"seeed": 1})");
    EXPECT_EQ(run("--config " + w("bad.json") + " gen-data --n 5 --out " + w("x.csv")), 2);
    write(work() / "broken.json", "{ not json");
    EXPECT_EQ(run("--config " + w("broken.json") + " gen-data --n 5 --out " + w("x.csv")), 2);
    write(work() / "bad.csv", "c1,c2\n1,2\n");
    write(work() / "model.json", R"({"schema": "cohlab.knn/1"})");
    EXPECT_EQ(run("evaluate --model " + w("model.json") + " --data " + w("bad.csv")), 2);
}

TEST(Cli, NumericalQualityErrorsExitThree) {
    write(work() / "flat.json", R"({"ranges": {"t_c": [3, 3], "t_h": [3, 3], "t_l": [3, 3]}})");
    EXPECT_EQ(run("--config " + w("flat.json") + " gen-data --n 5 --out " + w("flat.csv")), 3);
}

TEST(Cli, SameSeedSameBytes) {
    ASSERT_EQ(run("gen-data --n 150 --seed 9 --out " + w("a.csv")), 0);
    ASSERT_EQ(run("gen-data --n 150 --seed 9 --out " + w("b.csv")), 0);
    auto slurp = [](const fs::path& p) {
        std::ifstream is(p, std::ios::binary);
        return std::string(std::istreambuf_iterator<char>(is), {});
    };
    EXPECT_EQ(slurp(work() / "a.csv"), slurp(work() / "b.csv"));
}
