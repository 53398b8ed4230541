#include <doctest.h>

#include <filesystem>

#include "sxfer/dataset.hpp"
#include "sxfer/error.hpp"
#include "sxfer/io.hpp"
#include "sxfer/multitask.hpp"
#include "sxfer/nn/train.hpp"
#include "sxfer/transfer.hpp"

using namespace sxfer;
using namespace sxfer::multitask;

namespace {

data::TaskSpec film(int layers) {
    data::TaskSpec spec;
    spec.layer_count = layers;
    return spec;
}

std::vector<data::TaskSpec> four_films() { return {film(8), film(10), film(12), film(14)}; }

nn::TrainConfig short_config(int epochs) {
    nn::TrainConfig c;
    c.epochs = epochs;
    c.batch_size = 16;
    c.patience = 0;
    c.seed = 12;
    return c;
}

bool same_layers(const std::vector<nn::DenseLayer>& a, const std::vector<nn::DenseLayer>& b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (!(a[i] == b[i])) return false;
    }
    return true;
}

// Ten examples, with the validation split holding copies of the training examples.
data::LabeledDataset memorization_set(int layers, std::uint64_t seed) {
    auto ds = data::generate_dataset(film(layers), 10, seed);
    const auto n = static_cast<Eigen::Index>(ds.size());
    Eigen::MatrixXd f(ds.features.rows(), 2 * n), t(ds.targets.rows(), 2 * n);
    f << ds.features, ds.features;
    t << ds.targets, ds.targets;
    ds.features = f;
    ds.targets = t;
    ds.split.assign(static_cast<std::size_t>(n), data::Split::Train);
    ds.split.resize(static_cast<std::size_t>(2 * n), data::Split::Val);
    return ds;
}

}  // namespace

TEST_CASE("build_multitask structure") {
    const auto m = build_multitask(2, four_films(), 3);
    CHECK(m.n_shared() == 2);
    CHECK(m.task_count() == 4);
    for (const auto& head : m.heads) {
        CHECK(head.layers.size() == 5);
        CHECK(head.layers.front().weights.cols() == m.trunk.back().weights.rows());
        CHECK(head.layers.back().activation == nn::Activation::Sigmoid);
    }
    CHECK(m.heads[0].task_id == "film-8");
    CHECK(m.task_index("film-12") == 2);
    CHECK_THROWS_AS(m.task_index("film-9"), LookupError);

    CHECK_THROWS_AS(build_multitask(0, four_films(), 3), ConfigError);
    CHECK_THROWS_AS(build_multitask(7, four_films(), 3), ConfigError);
    CHECK_THROWS_AS(build_multitask(2, {film(8), film(8)}, 3), ConfigError);
    CHECK_THROWS_AS(build_multitask(2, {}, 3), ConfigError);

    const auto again = build_multitask(2, four_films(), 3);
    CHECK(same_layers(again.trunk, m.trunk));
    CHECK(same_layers(again.heads[3].layers, m.heads[3].layers));
}

TEST_CASE("heads draw from independent streams") {
    const auto m = build_multitask(3, {film(8), film(10)}, 9);
    for (std::size_t i = 0; i < m.heads[0].layers.size(); ++i) {
        CHECK(m.heads[0].layers[i].weights != m.heads[1].layers[i].weights);
    }
}

TEST_CASE("single task matches the plain network") {
    const auto arch = transfer::default_architecture(data::TaskKind::Film);
    const auto plain = nn::init_network(arch, 21);
    const auto ds = data::generate_dataset(film(8), 30, 4);
    for (std::size_t shared : {1u, 3u, 6u}) {
        const auto m = build_multitask(shared, {film(8)}, 21);
        CHECK(predict(m, 0, ds.features) == nn::predict(plain, ds.features));
    }
}

TEST_CASE("selective update") {
    const auto ds = data::generate_dataset(film(10), 40, 6);
    auto model = build_multitask(2, {film(8), film(10), film(12)}, 5);
    const auto before = model;
    MultiTaskOptimizer opt(model);
    const Eigen::MatrixXd x = ds.features.leftCols(16) * model.input_scale;
    const Eigen::MatrixXd t = ds.targets.leftCols(16);
    train_step(model, opt, 1, x, t, short_config(1), nn::Dropout{});

    CHECK(same_layers(model.heads[0].layers, before.heads[0].layers));
    CHECK(same_layers(model.heads[2].layers, before.heads[2].layers));
    CHECK(!same_layers(model.heads[1].layers, before.heads[1].layers));
    for (std::size_t i = 0; i < model.trunk.size(); ++i) CHECK(!(model.trunk[i] == before.trunk[i]));
    CHECK(opt.trunk[0].steps == 1);
    CHECK(opt.heads[1][0].steps == 1);
    CHECK(opt.heads[0][0].steps == 0);

    // The trunk moves under batches of every task.
    const auto after_b = model;
    train_step(model, opt, 0, x, t, short_config(1), nn::Dropout{});
    for (std::size_t i = 0; i < model.trunk.size(); ++i) CHECK(!(model.trunk[i] == after_b.trunk[i]));
    CHECK(same_layers(model.heads[1].layers, after_b.heads[1].layers));
}

TEST_CASE("degenerate multi-task training reproduces direct learning") {
    const auto ds = data::generate_dataset(film(8), 90, 8);
    auto config = short_config(4);
    config.keep_prob = 0.8;
    config.l2_lambda = 1e-6;
    const auto arch = transfer::default_architecture(data::TaskKind::Film);
    const auto plain = nn::train(nn::init_network(arch, 33), ds, config);
    for (std::size_t shared : {2u, 6u}) {
        const auto mt = train_multitask(build_multitask(shared, {film(8)}, 33), {ds}, config);
        CHECK(mt.history.tasks[0].train_loss == plain.history.train_loss);
        CHECK(mt.history.tasks[0].val_error == plain.history.val_error);
        CHECK(mt.history.mean_val_error == plain.history.val_error);
        CHECK(mt.history.best_epoch == plain.history.best_epoch);
        CHECK(predict(mt.model, 0, ds.features) == nn::predict(plain.model, ds.features));
    }
}

TEST_CASE("training is deterministic and validates its inputs") {
    const std::vector<data::LabeledDataset> sets = {data::generate_dataset(film(8), 40, 1),
                                                    data::generate_dataset(film(10), 60, 2)};
    const auto model = build_multitask(2, {film(8), film(10)}, 4);
    const auto a = train_multitask(model, sets, short_config(3));
    const auto b = train_multitask(model, sets, short_config(3));
    CHECK(a.history.mean_val_error == b.history.mean_val_error);
    for (std::size_t t = 0; t < 2; ++t) CHECK(a.history.tasks[t].train_loss == b.history.tasks[t].train_loss);
    CHECK(same_layers(a.model.trunk, b.model.trunk));
    CHECK(a.history.mean_val_error[0] ==
          doctest::Approx((a.history.tasks[0].val_error[0] + a.history.tasks[1].val_error[0]) / 2).epsilon(1e-15));

    CHECK_THROWS_AS(train_multitask(model, {sets[0]}, short_config(1)), ConfigError);
    CHECK_THROWS_AS(train_multitask(model, {sets[1], sets[0]}, short_config(1)), ConfigError);

    auto wild = short_config(3);
    wild.optimizer = nn::OptimizerKind::Sgd;
    wild.learning_rate = 1e200;
    try {
        train_multitask(model, sets, wild);
        FAIL("expected TrainingError");
    } catch (const TrainingError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("film-") != std::string::npos);
        CHECK(msg.find("epoch") != std::string::npos);
    }
}

TEST_CASE("evaluation") {
    const std::vector<data::LabeledDataset> sets = {memorization_set(4, 1), memorization_set(6, 2)};
    auto config = short_config(1500);
    config.batch_size = 10;
    const auto trained = train_multitask(build_multitask(2, {film(4), film(6)}, 7), sets, config);
    for (std::size_t t = 0; t < 2; ++t) {
        const auto id = trained.model.heads[t].task_id;
        const auto err = evaluate_multitask(trained.model, id, sets[t], data::Split::Train);
        CHECK(err.mean < 0.01);
        CHECK(err.examples == 10);
        CHECK(evaluate_multitask(trained.model, id, sets[t], data::Split::Train).mean == err.mean);
    }
    CHECK_THROWS_AS(evaluate_multitask(trained.model, "film-8", sets[0]), LookupError);
    CHECK_THROWS_AS(evaluate_multitask(trained.model, "film-4", sets[1]), ConfigError);
}

TEST_CASE("multi-task checkpoint") {
    auto model = build_multitask(3, four_films(), 11);
    model.provenance["note"] = "unit";
    const auto path = std::filesystem::temp_directory_path() / "sxfer_test_multitask.ckpt";
    save_multitask(model, path);
    const auto loaded = load_multitask(path);
    CHECK(loaded.n_shared() == 3);
    CHECK(loaded.provenance == model.provenance);
    const auto ds = data::generate_dataset(film(12), 20, 3);
    for (std::size_t t = 0; t < 4; ++t) {
        CHECK(loaded.heads[t].task_id == model.heads[t].task_id);
        CHECK(loaded.heads[t].spec == model.heads[t].spec);
        CHECK(predict(loaded, t, ds.features) == predict(model, t, ds.features));
    }
    auto text = read_file(path);
    auto damaged = text;
    const auto at = damaged.find("\nfilm-10.1 weights ") + 25;
    damaged[at] = damaged[at] == 'A' ? 'B' : 'A';
    CHECK_THROWS_AS(parse_multitask(damaged), FormatError);
    CHECK_THROWS_AS(parse_multitask(text.substr(0, text.size() - 100)), FormatError);
    CHECK_THROWS_AS(parse_multitask("{}"), FormatError);
}

TEST_CASE("shared-depth sweep structure") {
    std::vector<data::LabeledDataset> sets;
    for (const auto& spec : four_films()) sets.push_back(data::generate_dataset(spec, 20, 5));
    const auto sweep = sweep_shared_depth(sets, {1, 2, 3, 4, 5}, short_config(1), {1, 1}, transfer::Context{});
    REQUIRE(sweep.test_errors.size() == 5);
    for (const auto& row : sweep.test_errors) {
        REQUIRE(row.size() == 4);
        for (const auto& cell : row) CHECK(cell.size() == 1);
    }
    CHECK(sweep.direct_test_errors.size() == 4);
    for (std::size_t t = 0; t < 4; ++t) CHECK(sweep.best_depth_index(t) < 5);
}
