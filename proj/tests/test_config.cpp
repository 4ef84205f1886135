#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "flicker/cli/preset.hpp"

using namespace flicker;

namespace {

struct TempDir {
  std::filesystem::path path;
  TempDir() {
    path = std::filesystem::temp_directory_path() /
           ("flicker_config_" + std::to_string(reinterpret_cast<std::uintptr_t>(this)));
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
  std::filesystem::path write(const std::string& name, const std::string& text) const {
    std::ofstream(path / name) << text;
    return path / name;
  }
};

std::string env_include() { return "include: [" + (preset_dir() / "envs" / "spread.yaml").string() + "]\n"; }

}  // namespace

TEST_CASE("every shipped run preset loads and validates") {
  int loaded = 0;
  for (std::string env : {"tag", "spread", "guard", "repel", "adversary", "hunt"}) {
    for (std::string method : {"qmix", "flicker"}) {
      for (std::string bb : {"mlp", "attn"}) {
        Preset p = load_preset(env + "_" + method + "_" + bb);
        CHECK(p.name == env + "_" + method + "_" + bb);
        CHECK(env_name(p.scenario->env) == env);
        CHECK(p.method == (method == "flicker" ? Method::Flicker : Method::Backbone));
        CHECK(p.model.backbone == (bb == "mlp" ? Backbone::Mlp : Backbone::Attention));
        CHECK(p.train.batch_size == 32);
        CHECK(p.train.buffer_size == 5000);
        CHECK(p.train.test_interval == 20000);
        CHECK(p.train.test_episodes == 15);
        CHECK(p.train.max_timesteps == 3000000);
        CHECK(p.model.mixing_embed_dim == 32);
        CHECK(p.model.hypernet_embed_dim == 128);
        CHECK(p.domain_mode == DomainMode::Ood1);
        ++loaded;
      }
    }
  }
  CHECK(loaded == 24);
}

TEST_CASE("hyperparameter tables are carried verbatim") {
  Preset spread = load_preset("spread_flicker_mlp");
  CHECK(spread.train.epsilon_finish == 0.05);
  CHECK(spread.train.epsilon_anneal_steps == 500000);
  CHECK(spread.train.parallel_envs == 8);
  CHECK(spread.train.lr == 0.0003);
  CHECK(spread.model.rnn_input_dim == 32);
  CHECK(spread.model.rnn_hidden_dim == 64);
  CHECK(spread.model.hyper_activation == HyperActivation::Abs);

  Preset tag = load_preset("tag_qmix_attn");
  CHECK(tag.train.epsilon_finish == 0.3);
  CHECK(tag.train.epsilon_anneal_steps == 4000000);
  CHECK(tag.train.parallel_envs == 32);
  CHECK(tag.model.token_dim == 128);
  CHECK(tag.model.hyper_activation == HyperActivation::Abs);
  CHECK(tag.model.rnn_hidden_dim == 128);

  Preset repel = load_preset("repel_flicker_attn");
  CHECK(repel.model.hyper_activation == HyperActivation::Softmax);
  CHECK(repel.model.rnn_input_dim == 128);
  CHECK(repel.model.rnn_hidden_dim == 512);

  Preset adv = load_preset("adversary_qmix_mlp");
  CHECK(adv.train.lr == 0.0005);
  CHECK(adv.train.epsilon_anneal_steps == 1000000);
}

TEST_CASE("n_train defaults to the in-domain upper bounds") {
  Preset tag = load_preset("tag_flicker_mlp");
  CHECK(tag.n_train() == std::vector<int>{4, 4});
  Preset guard = load_preset("guard_flicker_mlp");
  CHECK(guard.n_train() == std::vector<int>{4, 3});
  CHECK(guard.model_config().slots == std::vector<int>{4, 3});
}

TEST_CASE("unknown keys are rejected with their location") {
  TempDir dir;
  auto path = dir.write("bad.yaml", env_include() + "method: flicker\nbackbone: mlp\ntrain:\n  lr: 0.1\n  learning_speed: 3\n");
  try {
    load_preset(path.string());
    FAIL("expected a ConfigError");
  } catch (const ConfigError& e) {
    CHECK(e.where().line == 6);
    CHECK(std::string(e.what()).find("train.learning_speed") != std::string::npos);
  }
}

TEST_CASE("type errors are reported with their location") {
  TempDir dir;
  auto path = dir.write("bad.yaml", env_include() + "method: flicker\nbackbone: mlp\nmodel:\n  token_dim: wide\n");
  try {
    load_preset(path.string());
    FAIL("expected a ConfigError");
  } catch (const ConfigError& e) {
    CHECK(e.where().line == 5);
    CHECK(std::string(e.what()).find("expected an integer") != std::string::npos);
  }
}

TEST_CASE("including files merge maps and let the includer override") {
  TempDir dir;
  dir.write("base.yaml", "train:\n  lr: 0.5\n  batch_size: 4\n  buffer_size: 10\n");
  auto path = dir.write("top.yaml", "include: [base.yaml, " + (preset_dir() / "envs" / "spread.yaml").string() +
                                        "]\nmethod: backbone\nbackbone: attention\ntrain:\n  lr: 0.25\n");
  Preset p = load_preset(path.string());
  CHECK(p.train.lr == 0.25);
  CHECK(p.train.batch_size == 4);
  CHECK(p.train.buffer_size == 10);
  CHECK(p.name == "top");
}

TEST_CASE("include problems") {
  TempDir dir;
  dir.write("a.yaml", "include: [b.yaml]\n");
  dir.write("b.yaml", "include: [a.yaml]\n");
  CHECK_THROWS_AS(load_preset((dir.path / "a.yaml").string()), ConfigError);
  auto missing = dir.write("m.yaml", "include: [nope.yaml]\n");
  CHECK_THROWS_AS(load_preset(missing.string()), ConfigError);
  CHECK_THROWS_AS(load_preset("no_such_preset_anywhere"), ConfigError);
}

TEST_CASE("semantic errors carry the file name") {
  TempDir dir;
  auto path = dir.write("m.yaml", env_include() + "method: sideways\nbackbone: mlp\n");
  try {
    load_preset(path.string());
    FAIL("expected a ConfigError");
  } catch (const ConfigError& e) {
    CHECK(e.where().file == path.string());
    CHECK(e.where().line == 2);
  }
  auto eps = dir.write("e.yaml", env_include() + "method: flicker\nbackbone: mlp\ntrain:\n  epsilon_finish: 2\n");
  CHECK_THROWS_AS(load_preset(eps.string()), ConfigError);
}

TEST_CASE("malformed yaml reports a position") {
  try {
    parse_config_string("a: [1, 2\nb: 3\n", "inline.yaml");
    FAIL("expected a ConfigError");
  } catch (const ConfigError& e) {
    CHECK(e.where().file == "inline.yaml");
    CHECK(e.where().line > 0);
  }
}
