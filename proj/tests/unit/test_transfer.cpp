#include <doctest.h>

#include <filesystem>
#include <set>

#include "sxfer/dataset.hpp"
#include "sxfer/error.hpp"
#include "sxfer/experiment/cache.hpp"
#include "sxfer/io.hpp"
#include "sxfer/nn/train.hpp"
#include "sxfer/transfer.hpp"

using namespace sxfer;
using namespace sxfer::transfer;

namespace {

nn::Architecture narrow_arch(nn::Activation out = nn::Activation::Sigmoid, std::size_t width = 16) {
    return nn::make_architecture(data::kMaskWidth, width, kHiddenLayers, 200, out);
}

const data::LabeledDataset& film_set(int layers, std::size_t size, std::uint64_t seed) {
    static std::map<std::tuple<int, std::size_t, std::uint64_t>, data::LabeledDataset> memo;
    auto key = std::make_tuple(layers, size, seed);
    auto it = memo.find(key);
    if (it == memo.end()) {
        data::TaskSpec spec;
        spec.layer_count = layers;
        it = memo.emplace(key, data::generate_dataset(spec, size, seed)).first;
    }
    return it->second;
}

nn::TrainConfig short_config(int epochs) {
    nn::TrainConfig c;
    c.epochs = epochs;
    c.batch_size = 16;
    c.patience = 0;
    return c;
}

std::filesystem::path fresh_dir(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / name;
    std::filesystem::remove_all(dir);
    return dir;
}

}  // namespace

TEST_CASE("transfer plans") {
    CHECK_NOTHROW(TransferPlan::none().validate());
    CHECK(TransferPlan::none().empty());
    CHECK_THROWS_AS(TransferPlan({2, 1}).validate(), RangeError);
    CHECK_THROWS_AS(TransferPlan({0, 3}).validate(), RangeError);
    CHECK_THROWS_AS(TransferPlan({1, 7}).validate(), RangeError);
    CHECK_NOTHROW(TransferPlan({1, 6}).validate());

    const auto plans = grid_plans();
    REQUIRE(plans.size() == kGridCells);
    std::set<std::size_t> indices;
    for (std::size_t i = 0; i < plans.size(); ++i) {
        CHECK(cell_index(plans[i]) == i + 1);
        indices.insert(cell_index(plans[i]));
    }
    CHECK(indices.size() == 21);
    CHECK(cell_index(TransferPlan::none()) == 0);
    CHECK(cell_index({6, 6}) == 21);
    CHECK(plan_from_json(plan_to_json({2, 3})) == TransferPlan{2, 3});
    CHECK_THROWS_AS(plan_from_json(nlohmann::json::parse(R"({"n1":1,"n2":2,"x":0})")), ConfigError);
}

TEST_CASE("transfer_layers copies exactly the planned range") {
    const auto arch = default_architecture(data::TaskKind::Film);
    const auto base = init_network(arch, 77);
    const std::uint64_t seed = 5;
    const auto fresh = init_network(arch, seed);

    SUBCASE("empty plan is direct initialization") {
        const auto m = transfer_layers(base, TransferPlan::none(), seed);
        for (std::size_t l = 0; l < m.layers.size(); ++l) CHECK(m.layers[l] == fresh.layers[l]);
    }
    SUBCASE("first six layers") {
        const auto m = transfer_layers(base, TransferPlan::first(6), seed);
        for (std::size_t l = 0; l < 6; ++l) CHECK(m.layers[l] == base.layers[l]);
        CHECK(m.layers[6] == fresh.layers[6]);
    }
    SUBCASE("middle range") {
        const auto m = transfer_layers(base, {2, 3}, seed);
        const auto origin = m.provenance["transfer"]["layer_origin"];
        for (std::size_t l = 0; l < m.layers.size(); ++l) {
            const bool copied = l == 1 || l == 2;
            CHECK(m.layers[l] == (copied ? base.layers[l] : fresh.layers[l]));
            CHECK(origin[l] == (copied ? "base" : "fresh"));
        }
    }
    SUBCASE("compatibility") {
        const auto wider = nn::make_architecture(16, 128, 6, 200, nn::Activation::Sigmoid);
        CHECK_THROWS_AS(transfer_layers(base, {1, 2}, wider, seed), CompatibilityError);
        const auto sphere_base = init_network(default_architecture(data::TaskKind::Sphere), 3);
        const auto m = transfer_layers(sphere_base, {2, 3}, arch, seed);
        CHECK(m.fingerprint() == nn::architecture_fingerprint(arch));
        CHECK(m.layers[1] == sphere_base.layers[1]);
        CHECK(m.layers.back().activation == nn::Activation::Sigmoid);
    }
    SUBCASE("frozen plans") {
        CHECK(trainable_mask({2, 3, true}, 7) == std::vector<bool>(7, true));
        CHECK(trainable_mask({2, 3, false}, 7) == std::vector<bool>{true, false, false, true, true, true, true});
    }
}

TEST_CASE("run cache returns stored results") {
    const auto& target = film_set(4, 80, 3);
    Context ctx{exp::Cache(fresh_dir("sxfer_test_transfer_cache")), 1, {}};
    RunSpec spec;
    spec.arch = narrow_arch();
    spec.init_seed = 4;
    spec.config = short_config(4);
    const auto first = run_finetune(target, spec, ctx);
    const auto key = exp::Cache::key_of(run_description(target, spec));
    const auto path = ctx.cache.entry_path("runs", key, ".json");
    REQUIRE(std::filesystem::exists(path));
    const auto second = run_finetune(target, spec, ctx);
    CHECK(second.test_error == first.test_error);
    CHECK(second.history.val_error == first.history.val_error);

    const auto uncached = run_finetune(target, spec, Context{});
    CHECK(uncached.test_error == first.test_error);

    write_file_atomic(path, "{not json");
    CHECK(run_finetune(target, spec, ctx).test_error == first.test_error);
    CHECK(nlohmann::json::parse(read_file(path))["key"] == key);

    auto other = spec;
    other.init_seed = 5;
    CHECK(exp::Cache::key_of(run_description(target, other)) != key);
}

TEST_CASE("grid search report structure and baseline parity") {
    const auto& source = film_set(6, 200, 11);
    const auto& target = film_set(4, 80, 12);
    Context ctx;
    const auto base = train_basenet(source, narrow_arch(), short_config(5), 1, ctx);
    TransferSetup setup{narrow_arch(), short_config(4), {3, 2}};
    const auto report = grid_search_transfer(base, target, setup, ctx);

    REQUIRE(report.cells.size() == 21);
    CHECK_NOTHROW(report.validate());
    CHECK(report.direct_errors.size() == 2);
    CHECK(!report.any_failed());
    const auto direct = run_direct(target, setup, ctx);
    for (std::size_t r = 0; r < direct.size(); ++r) CHECK(direct[r].test_error == report.direct_errors[r]);

    const auto best = report.best_cell();
    REQUIRE(best.has_value());
    for (const auto& c : report.cells) {
        CHECK(c.errors.size() == 2);
        CHECK(c.summary.mean >= report.cells[*best].summary.mean);
        CHECK(c.negative == (c.summary.mean > report.direct.mean));
        CHECK(c.reduction == doctest::Approx((report.direct.mean - c.summary.mean) / report.direct.mean));
    }
    const auto negatives = report.negative_cells();
    for (auto i : negatives) CHECK(report.cells[i].negative);

    auto tampered = report;
    tampered.cells[0].reduction += 0.1;
    CHECK_THROWS_AS(tampered.validate(), ValidationError);
}

TEST_CASE("a failing cell does not abort the grid") {
    const auto& target = film_set(4, 60, 21);
    auto base = init_network(narrow_arch(), 9);
    base.layers[2].weights.setConstant(1e308);
    TransferSetup setup{narrow_arch(), short_config(2), {1, 1}};
    const auto report = grid_search_transfer(base, target, setup, Context{});
    REQUIRE(report.cells.size() == 21);
    CHECK(report.any_failed());
    for (const auto& c : report.cells) {
        CHECK(c.failed == c.plan.copies(3));
        if (c.failed) CHECK(!c.failure.empty());
    }
    CHECK_NOTHROW(report.validate());
}

TEST_CASE("self-transfer does not hurt") {
    // BaseNet trained to convergence on the target itself, so fine-tuning is a warm start
    // on the same distribution. At width 16 the net is capacity bound and the comparison
    // is a coin flip, hence the wider trunk.
    const auto& target = film_set(4, 300, 31);
    auto config = short_config(200);
    config.patience = 30;
    auto base_config = short_config(600);
    base_config.patience = 100;
    Context ctx;
    const auto arch = narrow_arch(nn::Activation::Sigmoid, 64);
    const auto base = train_basenet(target, arch, base_config, 500, ctx);
    TransferSetup setup{arch, config, {40, 5}};
    const auto report = evaluate_plans(base, target, {TransferPlan::first(6)}, setup, ctx);
    CHECK(report.cells[0].summary.mean <= report.direct.mean);

    const TransferSetup grid_setup{arch, config, {40, 3}};
    const auto grid = grid_search_transfer(base, target, grid_setup, ctx);
    REQUIRE(grid.best_cell());
    CHECK(grid.cells[*grid.best_cell()].summary.mean <= grid.direct.mean);
}
