#include <doctest.h>

#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <vector>

#include <unistd.h>

#include "sxfer/error.hpp"
#include "sxfer/experiment/cache.hpp"
#include "sxfer/experiment/config.hpp"
#include "sxfer/experiment/parallel.hpp"
#include "sxfer/experiment/report.hpp"
#include "sxfer/experiment/stats.hpp"
#include "sxfer/experiment/svg.hpp"
#include "sxfer/io.hpp"

using namespace sxfer;
using namespace sxfer::exp;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
    const auto dir = fs::temp_directory_path() / (name + "-" + std::to_string(::getpid()));
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

int run_cli(const std::string& args) {
    const std::string cmd = std::string(SXFER_CLI_PATH) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

void write_text(const fs::path& path, const std::string& text) { std::ofstream(path) << text; }

}  // namespace

TEST_CASE("config parsing") {
    const auto doc = nlohmann::json::parse(R"({
        "$comment": "notes are allowed",
        "seed": 7,
        "seeds": 3,
        "train": {"epochs": 20, "learning_rate": 0.01},
        "target": {"task": {"kind": "film", "layer_count": 8}, "size": 300, "seed": 2},
        "plans": [{"n1": 2, "n2": 4}]
    })");
    const auto config = config_from_json(doc);
    CHECK(config.seed == 7);
    CHECK(config.seeds == 3);
    CHECK(config.train.config.epochs == 20);
    CHECK(config.train.auto_batch);
    CHECK(config.source_train == config.train);
    REQUIRE(config.target);
    CHECK(config.target->size == 300);
    CHECK(config.target->label() == "film-8-n300-s2");
    REQUIRE(config.plans.size() == 1);
    CHECK(config.plans[0].n1 == 2);
    CHECK(config.plans[0].n2 == 4);

    SUBCASE("round trip keeps the hash") {
        const auto again = config_from_json(config_to_json(config));
        CHECK(config_hash(again) == config_hash(config));
        CHECK(config_hash(config).size() == 16);
    }
    SUBCASE("hash follows content") {
        auto other = config;
        other.seeds = 4;
        CHECK(config_hash(other) != config_hash(config));
    }
    SUBCASE("batch follows the training-set size unless given") {
        CHECK(config.train.resolve(400).batch_size == 32);
        CHECK(config.train.resolve(16000).batch_size == 100);
        auto fixed = doc;
        fixed["train"]["batch_size"] = 8;
        CHECK(config_from_json(fixed).train.resolve(16000).batch_size == 8);
    }
}

TEST_CASE("config errors") {
    auto parse = [](const char* text) { return config_from_json(nlohmann::json::parse(text)); };
    CHECK_THROWS_AS(parse(R"({"sed": 1})"), ConfigError);
    CHECK_THROWS_AS(parse(R"({"train": {"epochs": 5, "lr": 0.1}})"), ConfigError);
    CHECK_THROWS_AS(parse(R"({"train": {"seed": 5}})"), ConfigError);
    CHECK_THROWS_AS(parse(R"({"target": {"task": {"kind": "film", "layer_count": 8}, "size": 0}})"),
                    ValidationError);
    CHECK_THROWS_AS(parse(R"({"target": {"task": {"kind": "prism", "layer_count": 8}}})"), ConfigError);
    CHECK_THROWS_AS(parse(R"({"plans": [{"n1": 4, "n2": 2}]})"), RangeError);
    CHECK_THROWS(load_config("/nonexistent/config.json"));
}

TEST_CASE("summary statistics") {
    const std::vector<double> v = {2.0, 4.0, 4.0, 4.0, 5.0, 5.0, 7.0, 9.0};
    const auto s = summarize(v);
    CHECK(s.count == 8);
    CHECK(s.mean == doctest::Approx(5.0));
    CHECK(s.stddev == doctest::Approx(std::sqrt(32.0 / 7.0)));
    const std::vector<double> one = {3.0};
    CHECK(summarize(one).stddev == 0.0);
}

TEST_CASE("parallel_for runs every index and reports the first failure") {
    std::vector<std::atomic<int>> hits(50);
    parallel_for(hits.size(), 4, [&](std::size_t i) { hits[i]++; });
    for (const auto& h : hits) CHECK(h == 1);

    std::atomic<int> calls = 0;
    try {
        parallel_for(20, 3, [&](std::size_t i) {
            calls++;
            if (i == 7 || i == 12) throw RangeError("index " + std::to_string(i));
        });
        FAIL("expected an exception");
    } catch (const RangeError& e) {
        CHECK(std::string(e.what()).find("index 7") != std::string::npos);
    }
    CHECK(calls == 20);
}

TEST_CASE("csv reports") {
    CsvTable table({"name", "value"});
    table.row({"plain", cell(0.5)}).row({"has,comma", cell(std::size_t{3})}).row({"has \"quote\"", cell(true)});
    ReportMeta meta{"transfer", "abc", {{"film-8-n500-s2", "ffff"}}, {{"plan", "1-6"}}};
    const auto text = table.render(meta);
    CHECK(text.find("# command: transfer\n") != std::string::npos);
    CHECK(text.find("# config_hash: abc\n") != std::string::npos);
    CHECK(text.find("# dataset film-8-n500-s2: ffff\n") != std::string::npos);
    CHECK(text.find("name,value\n") != std::string::npos);
    CHECK(text.find("plain,0.5\n") != std::string::npos);
    CHECK(text.find("\"has,comma\",3\n") != std::string::npos);
    CHECK(text.find("\"has \"\"quote\"\"\",1\n") != std::string::npos);
    CHECK(cell(1.0 / 3.0) == "0.33333333");
    CHECK_THROWS_AS(CsvTable({"a"}).row({"1", "2"}), DimensionError);
}

TEST_CASE("svg rendering") {
    CHECK(svg::escape("a<b & \"c\">") == "a&lt;b &amp; &quot;c&quot;&gt;");

    svg::LinePlot plot;
    plot.title = "error <vs> size";
    plot.series.push_back({"direct", {100, 1000, 10000}, {0.1, 0.05, 0.02}, {0.01, 0.01, 0.005}});
    plot.log_x = true;
    const auto line = svg::render(plot);
    CHECK(line.rfind("<svg", 0) == 0);
    CHECK(line.find("</svg>") != std::string::npos);
    CHECK(line.find("error &lt;vs&gt; size") != std::string::npos);
    CHECK(line.find("<polyline") != std::string::npos);

    svg::Heatmap map;
    map.rows = {"1", "2"};
    map.cols = {"1", "2"};
    map.values = {{0.05, std::nan("")}, {0.07, 0.04}};
    map.center = 0.06;
    map.marked = {{1, 1}};
    const auto heat = svg::render(map);
    CHECK(heat.find("5.00%") != std::string::npos);
    CHECK(heat.find("4.00%*") != std::string::npos);
    CHECK(heat.find("nan") == std::string::npos);
}

TEST_CASE("cache entries") {
    const auto root = fresh_dir("sxfer-cache-test");
    const Cache cache(root);
    const auto key = Cache::key_of({{"kind", "test"}, {"x", 1}});
    CHECK(key.size() == 64);
    CHECK(key != Cache::key_of({{"kind", "test"}, {"x", 2}}));
    CHECK_FALSE(cache.load_json("runs", key));

    cache.store_json("runs", key, {{"value", 42}});
    const auto path = cache.entry_path("runs", key, ".json");
    CHECK(path == root / "runs" / key.substr(0, 2) / (key + ".json"));
    CHECK(fs::exists(path));
    REQUIRE(cache.load_json("runs", key));
    CHECK(cache.load_json("runs", key)->at("value") == 42);

    write_text(path, "{ not json");
    CHECK_FALSE(cache.load_json("runs", key));

    const Cache disabled;
    CHECK_FALSE(disabled.enabled());
    disabled.store_json("runs", key, {{"value", 1}});
    CHECK_FALSE(disabled.load_json("runs", key));

    ::setenv(kCacheEnv, (root / "env").c_str(), 1);
    CHECK(Cache::from_environment("fallback").root() == root / "env");
    ::setenv(kCacheEnv, "", 1);
    CHECK(Cache::from_environment("fallback").root() == "fallback");
    ::unsetenv(kCacheEnv);
    fs::remove_all(root);
}

TEST_CASE("cli exit codes") {
    const auto dir = fresh_dir("sxfer-cli-test");
    const auto out = (dir / "out").string();
    write_text(dir / "unknown.json", R"({"seeds": 1, "colour": "blue"})");
    write_text(dir / "empty.json", R"({"dataset": {"task": {"kind": "film", "layer_count": 3}, "size": 0}})");
    write_text(dir / "ok.json", R"({"dataset": {"task": {"kind": "film", "layer_count": 3}, "size": 20, "seed": 4}})");

    CHECK(run_cli("--config " + (dir / "unknown.json").string() + " --no-cache --out-dir " + out + " gen-data") == 2);
    CHECK(run_cli("--config " + (dir / "empty.json").string() + " --no-cache --out-dir " + out + " gen-data") == 2);
    CHECK(run_cli("--no-cache --out-dir " + out + " gen-data --kind film --layers 3 --size 0") == 2);
    CHECK(run_cli("--no-cache --out-dir " + out + " transfer") == 2);
    CHECK(run_cli("--no-cache --out-dir " + out + " predict --checkpoint " + (dir / "missing.ckpt").string() +
                  " --thicknesses 40,50") != 0);
    CHECK(run_cli("frobnicate") != 0);

    CHECK(run_cli("--config " + (dir / "ok.json").string() + " --no-cache --out-dir " + out + " gen-data") == 0);
    CHECK(fs::exists(dir / "out" / "gen-data.csv"));
    CHECK(fs::exists(dir / "out" / "gen-data.json"));
    CHECK(run_cli("--out-dir " + (dir / "again").string() + " report --input " +
                  (dir / "out" / "gen-data.json").string()) == 0);
    CHECK(read_file(dir / "again" / "gen-data.csv") == read_file(dir / "out" / "gen-data.csv"));
    fs::remove_all(dir);
}
