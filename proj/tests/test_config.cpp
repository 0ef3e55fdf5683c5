#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <set>
#include <string>

#include "selfact/config.hpp"
#include "selfact/errors.hpp"

using namespace selfact;

TEST_CASE("config: key table is complete and self-consistent") {
    const auto& keys = config_keys();
    CHECK(keys.size() >= 25);
    std::set<std::string> names;
    std::string as_text;
    for (const auto& k : keys) {
        CHECK_FALSE(k.key.empty());
        CHECK_FALSE(k.help.empty());
        CHECK(names.insert(k.key).second);  // no duplicate keys
        as_text += k.key + "=" + k.default_value + "\n";
    }
    // Parsing every default back yields the default configuration.
    auto parsed = parse_config_text(as_text);
    CHECK(config_fingerprint(parsed) == config_fingerprint(default_experiment_config()));
}

TEST_CASE("config: defaults are desk-scale") {
    auto cfg = default_experiment_config();
    CHECK(cfg.pretrain.epochs == 10);
    CHECK(cfg.pretrain.batch_size == 64);
    CHECK(cfg.session.acc_th == 100);
    CHECK(cfg.thresholds == std::vector<double>{0.50, 0.75, 0.90, 0.95});
    CHECK(cfg.backend == EncoderBackend::kStatistical);
}

TEST_CASE("config: parsing text") {
    auto cfg = parse_config_text(
        "# a comment line\n"
        "\n"
        "seed = 7   # trailing comment\n"
        "backend=conv\n"
        "session.acc_th = 250\n"
        "eval.thresholds = 0.3, 0.6\n"
        "synth.activities = 3\n"
        "data.label_merge = jog:run,sprint:run\n"
        "finetune.unfreeze_encoder = false\n"
        "seed=8\n");  // later assignment wins
    CHECK(cfg.seed == 8);
    CHECK(cfg.backend == EncoderBackend::kConv);
    CHECK(cfg.session.acc_th == 250);
    CHECK(cfg.thresholds == std::vector<double>{0.3, 0.6});
    CHECK(cfg.synth.activities.size() == 3);
    CHECK(cfg.dataset.label_merge_map.at("jog") == "run");
    CHECK(cfg.dataset.label_merge_map.at("sprint") == "run");
    CHECK_FALSE(cfg.finetune.unfreeze_encoder);
}

TEST_CASE("config: parse errors carry line numbers") {
    CHECK_THROWS_WITH_AS(parse_config_text("seed=1\nbogus.key=2\n"), doctest::Contains("line 2"),
                         DataError);
    CHECK_THROWS_WITH_AS(parse_config_text("seed=abc\n"), doctest::Contains("line 1"), DataError);
    CHECK_THROWS_WITH_AS(parse_config_text("just words\n"), doctest::Contains("line 1"), DataError);
    CHECK_THROWS_WITH_AS(parse_config_text("backend=umap\n"), doctest::Contains("backend"),
                         DataError);
    CHECK_THROWS_WITH_AS(parse_config_text("finetune.unfreeze_encoder=sometimes\n"),
                         doctest::Contains("line 1"), DataError);
}

TEST_CASE("config: overrides") {
    auto cfg = default_experiment_config();
    apply_override(cfg, "session.dbscan_min_pts=4");
    CHECK(cfg.session.dbscan_min_pts == 4);
    apply_override(cfg, "data.csv_paths=a.csv,b.csv");
    CHECK(cfg.csv_paths == std::vector<std::string>{"a.csv", "b.csv"});
    CHECK_THROWS_AS(apply_override(cfg, "no_equals_sign"), DataError);
    CHECK_THROWS_AS(apply_override(cfg, "unknown=1"), DataError);
}

TEST_CASE("config: canonical string is a fixpoint") {
    auto cfg = default_experiment_config();
    cfg.seed = 123;
    cfg.backend = EncoderBackend::kConv;
    cfg.thresholds = {0.25, 0.5};
    cfg.dataset.label_merge_map = {{"b", "a"}, {"c", "a"}};
    cfg.synth.noise_std = 0.125;

    auto canon = canonical_config_string(cfg);
    auto reparsed = parse_config_text(canon);
    CHECK(canonical_config_string(reparsed) == canon);
    CHECK(config_fingerprint(reparsed) == config_fingerprint(cfg));
}

TEST_CASE("config: fingerprint is stable and sensitive") {
    auto a = default_experiment_config();
    auto b = default_experiment_config();
    CHECK(config_fingerprint(a) == config_fingerprint(b));
    CHECK(config_fingerprint(a).size() == 16);
    b.seed = 2;
    CHECK(config_fingerprint(a) != config_fingerprint(b));
    b = default_experiment_config();
    b.session.dbscan_eps = 0.01;
    CHECK(config_fingerprint(a) != config_fingerprint(b));
}
