#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <string>

#include "rbsde/config.hpp"
#include "rbsde/io.hpp"

using namespace rbsde;
namespace fs = std::filesystem;

namespace {

std::string bin_path() {
    const char* p = std::getenv("RBSDE_LAB_BIN");
    REQUIRE_MESSAGE(p != nullptr, "RBSDE_LAB_BIN must point at the rbsde_lab binary");
    return p;
}

std::string config_dir() {
    const char* p = std::getenv("RBSDE_CONFIG_DIR");
    REQUIRE_MESSAGE(p != nullptr, "RBSDE_CONFIG_DIR must point at the shipped configs");
    return p;
}

int run_cli(const std::string& args) {
    const int rc = std::system((bin_path() + " " + args + " > /dev/null 2>&1").c_str());
    return WEXITSTATUS(rc);
}

}  // namespace

TEST_CASE("config parsing: strict schema") {
    CHECK_THROWS_AS(parse_config("{"), ConfigError);
    CHECK_THROWS_AS(parse_config(R"({"experiment": "nope"})"), ConfigError);
    CHECK_THROWS_AS(parse_config(R"({"experiment": "solve", "typo_key": 1})"), ConfigError);
    CHECK_THROWS_AS(parse_config(R"({"experiment": "solve", "grid": {"dt": 0.1}})"), ConfigError);
    CHECK_THROWS_AS(parse_config(R"({"experiment": "solve", "solve": {"backend": "gpu"}})"),
                    ConfigError);
    CHECK_THROWS_AS(parse_config(R"({"experiment": "solve", "generator": {"params": {}}})"),
                    ConfigError);  // missing id
    const auto c = parse_config(R"({"experiment": "representation"})");
    CHECK(c.gen.name == "zero");      // defaults echoed
    CHECK(c.sde.name == "bm");
    CHECK(c.n_paths == 100000);
    CHECK(c.eps_schedule.size() == 5);
}

TEST_CASE("representation_instance honors the corollary34 preset") {
    const auto c = parse_config(R"({
        "experiment": "representation",
        "sde": {"id": "gbm"},
        "representation": {"preset": "corollary34", "eta": 2.0, "q": 0.3}
    })");
    const auto inst = c.representation_instance();
    CHECK(inst.coeffs.name == "bm");  // preset overrides the configured sde
    CHECK(inst.eta == 2.0);
    CHECK(inst.q[0] == 0.3);
}

TEST_CASE("shipped configs all validate") {
    for (const auto& entry : fs::directory_iterator(config_dir())) {
        if (entry.path().extension() != ".json") continue;
        CAPTURE(entry.path().string());
        CHECK_NOTHROW(parse_config(read_file(entry.path())));
    }
}

TEST_CASE("cli: list and validate") {
    CHECK(run_cli("list") == 0);
    CHECK(run_cli("validate " + config_dir() + "/solve_american_put.json") == 0);
    CHECK(run_cli("validate /nonexistent.json") == 2);
}

TEST_CASE("cli: unknown key exits 2, unstable scheme exits 3") {
    const fs::path tmp = fs::temp_directory_path() / "rbsde_cli_bad.json";
    write_file_atomic(tmp, R"({"experiment": "solve", "wat": 1})");
    CHECK(run_cli("run " + tmp.string()) == 2);
    CHECK(run_cli("run " + config_dir() + "/penalized_unstable.json --out-dir " +
                  (fs::temp_directory_path() / "rbsde_cli_unstable").string()) == 3);
}

TEST_CASE("cli: reruns are byte-identical") {
    const fs::path out1 = fs::temp_directory_path() / "rbsde_cli_rerun1";
    const fs::path out2 = fs::temp_directory_path() / "rbsde_cli_rerun2";
    fs::remove_all(out1);
    fs::remove_all(out2);
    const std::string cfg = config_dir() + std::string("/properties_flatness.json");
    CHECK(run_cli("run " + cfg + " --out-dir " + out1.string()) == 0);
    CHECK(run_cli("run " + cfg + " --out-dir " + out2.string()) == 0);
    std::size_t files = 0;
    for (const auto& entry : fs::directory_iterator(out1)) {
        ++files;
        const auto other = out2 / entry.path().filename();
        REQUIRE(fs::exists(other));
        CHECK(read_file(entry.path()) == read_file(other));
    }
    CHECK(files >= 1);
}

TEST_CASE("cli: seed override changes the report, same seed does not") {
    const fs::path outa = fs::temp_directory_path() / "rbsde_cli_seed_a";
    const fs::path outb = fs::temp_directory_path() / "rbsde_cli_seed_b";
    fs::remove_all(outa);
    fs::remove_all(outb);
    const std::string cfg = config_dir() + std::string("/apriori_bm.json");
    CHECK(run_cli("run " + cfg + " --out-dir " + outa.string()) == 0);
    CHECK(run_cli("run " + cfg + " --seed-override 999 --out-dir " + outb.string()) == 0);
    const auto ja = json::parse(read_file(outa / "apriori_bm_report.json"));
    const auto jb = json::parse(read_file(outb / "apriori_bm_report.json"));
    CHECK(ja["seed"] != jb["seed"]);
    CHECK(ja["apriori"]["ratio_coarse"] != jb["apriori"]["ratio_coarse"]);
}
