#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "stlsynth/cli.hpp"
#include "stlsynth/config.hpp"
#include "stlsynth/export.hpp"

using namespace stlsynth;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() /
               ("stlsynth_cli_test_" + std::to_string(::getpid()) + "_" +
                std::to_string(counter()++));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    static int& counter() {
        static int c = 0;
        return c;
    }
    std::string file(const std::string& name) const { return (path / name).string(); }
};

std::string tiny_config_text() {
    return
        "encoder = sequential\n"
        "attention = true\n"
        "seed = 5\n"
        "train.iterations = 4\n"
        "train.pairs_per_iteration = 1\n"
        "train.eval_every = 2\n"
        "train.eval_specs = 2\n"
        "train.templates = F\n"
        "model.encoder_hidden = 12\n"
        "model.decoder_hidden = 6\n"
        "model.embedding_dim = 6\n"
        "model.attention_dim = 6\n"
        "gen.per_template = 2\n";
}

std::string slurp(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    REQUIRE(is);
    std::ostringstream buf;
    buf << is.rdbuf();
    return buf.str();
}

int count_substr(const std::string& text, const std::string& needle) {
    int n = 0;
    for (std::size_t at = text.find(needle); at != std::string::npos;
         at = text.find(needle, at + needle.size()))
        ++n;
    return n;
}

}  // namespace

TEST_CASE("config parser rejects unknown keys and bad values") {
    CHECK_THROWS_AS(parse_config_text("bogus.key = 1\n"), ConfigError);
    CHECK_THROWS_AS(parse_config_text("train.beta = -1\n"), ConfigError);
    CHECK_THROWS_AS(parse_config_text("train.iterations = soon\n"), ConfigError);
    CHECK_THROWS_AS(parse_config_text("encoder sequential\n"), ConfigError);
    CHECK_THROWS_AS(parse_config_text("model.decoder_layers = 0\n"), ConfigError);
    CHECK_THROWS_AS(parse_config_text("model.encoder_hidden = -8\n"), ConfigError);
    RunConfig cfg = parse_config_text("# only a comment\n\n");
    CHECK(cfg.train.env.horizon == 16);
    CHECK(cfg.train.env.v_max == 1.5);
    CHECK(cfg.train.adam.lr == 3e-4);
    CHECK(cfg.train.arch.encoder_hidden == 128);
    CHECK(cfg.train.arch.decoder_hidden == 32);
    CHECK(cfg.train.arch.decoder_layers == 2);
    CHECK(cfg.train.arch.gnn_steps == 3);
    CHECK(cfg.train.arch.embedding_dim == 32);
    CHECK(cfg.train.env.x0 == State{0, 0, 0});
}

TEST_CASE("the default config text parses to the defaults") {
    RunConfig cfg = parse_config_text(default_config_text());
    CHECK(cfg.train.arch.attention);
    CHECK(cfg.train.templates.size() == 4);
}

TEST_CASE("missing subcommand or config file exits with code 2") {
    CHECK(cli::run_command({}) == 2);
    CHECK(cli::run_command({"train"}) == 2);
    CHECK(cli::run_command({"train", "--config", "/nonexistent/none.cfg"}) == 2);
}

TEST_CASE("missing checkpoint exits with code 3") {
    TempDir dir;
    write_file(dir.file("run.cfg"), tiny_config_text());
    int code = cli::run_command({"eval", "--config", dir.file("run.cfg"),
                                 "--checkpoint", dir.file("none.bin")});
    CHECK(code == 3);
}

TEST_CASE("train, rollout, gen-specs and eval round trip through the CLI") {
    TempDir dir;
    write_file(dir.file("run.cfg"), tiny_config_text() +
                                        "paths.spec_set = " + dir.file("specs.txt") +
                                        "\n");
    REQUIRE(cli::run_command({"train", "--config", dir.file("run.cfg"), "--out",
                              dir.path.string()}) == 0);
    CHECK(fs::exists(dir.file("checkpoint.bin")));
    CHECK(fs::exists(dir.file("checkpoint_eval.bin")));
    CHECK(fs::exists(dir.file("heldout_specs.txt")));

    std::string metrics = slurp(dir.file("metrics.csv"));
    CHECK(metrics.rfind("iteration,loss,eval_success_rate,eval_avg_robustness,"
                        "wallclock_s\n", 0) == 0);
    CHECK(count_substr(metrics, "\n") == 5);  // header + 4 iterations

    // Rollout with both exports.
    REQUIRE(cli::run_command({"rollout", "--config", dir.file("run.cfg"),
                              "--checkpoint", dir.file("checkpoint.bin"), "--spec",
                              "F[0,8](R(1,2.5,1,2.5))", "--out",
                              dir.path.string()}) == 0);
    std::string traj = slurp(dir.file("trajectory.csv"));
    CHECK(traj.rfind("t,qx,qy,theta,v,omega\n", 0) == 0);
    CHECK(count_substr(traj, "\n") == 18);  // header + 17 states

    std::string svg = slurp(dir.file("rollout.svg"));
    CHECK(count_substr(svg, "<circle") == 17);  // T+1 trajectory points
    CHECK(count_substr(svg, "<rect") == 1);     // one rectangle per predicate

    std::string att = slurp(dir.file("attention.csv"));
    CHECK(att.rfind("token,t0,", 0) == 0);
    CHECK(count_substr(att, "\n") == 6);  // header + 5 tokens of F[a,b](R(...))

    // Spec generation then evaluation.
    REQUIRE(cli::run_command({"gen-specs", "--config", dir.file("run.cfg"), "--out",
                              dir.path.string()}) == 0);
    REQUIRE(fs::exists(dir.file("specs.txt")));
    REQUIRE(cli::run_command({"eval", "--config", dir.file("run.cfg"),
                              "--checkpoint", dir.file("checkpoint.bin"), "--out",
                              dir.path.string()}) == 0);
    std::string evalcsv = slurp(dir.file("eval.csv"));
    CHECK(evalcsv.rfind("template,avg_robustness,success_rate\n", 0) == 0);
    CHECK(count_substr(evalcsv, "\n") == 2);  // header + one template row

    // Adaptation writes an adapted checkpoint.
    REQUIRE(cli::run_command({"adapt", "--config", dir.file("run.cfg"),
                              "--checkpoint", dir.file("checkpoint.bin"), "--spec",
                              "F[0,8](R(1,2.5,1,2.5))", "--out",
                              dir.path.string()}) == 0);
    CHECK(fs::exists(dir.file("checkpoint_adapted.bin")));
}

TEST_CASE("eval on an empty or malformed spec set exits with code 2") {
    TempDir dir;
    write_file(dir.file("run.cfg"), tiny_config_text() +
                                        "paths.spec_set = " + dir.file("empty.txt") +
                                        "\n");
    write_file(dir.file("empty.txt"), "");
    // Need a checkpoint first.
    REQUIRE(cli::run_command({"train", "--config", dir.file("run.cfg"), "--out",
                              dir.path.string()}) == 0);
    int code = cli::run_command({"eval", "--config", dir.file("run.cfg"),
                                 "--checkpoint", dir.file("checkpoint.bin")});
    CHECK(code == 2);
}

TEST_CASE("zero-initialized checkpoint rolls out a pinned-at-origin trajectory") {
    TempDir dir;
    write_file(dir.file("run.cfg"), tiny_config_text());
    // Write an all-zero checkpoint by hand.
    policy::Arch arch;
    arch.variant = policy::EncoderVariant::Sequential;
    arch.attention = true;
    arch.encoder_hidden = 12;
    arch.decoder_hidden = 6;
    arch.embedding_dim = 6;
    arch.attention_dim = 6;
    nn::ParamSet zeros = policy::make_params(arch);
    nn::save_checkpoint(dir.file("zero.bin"), policy::to_meta(arch), zeros);

    REQUIRE(cli::run_command({"rollout", "--config", dir.file("run.cfg"),
                              "--checkpoint", dir.file("zero.bin"), "--spec",
                              "F[0,8](R(1,2.5,1,2.5))", "--out",
                              dir.path.string()}) == 0);
    std::string traj = slurp(dir.file("trajectory.csv"));
    std::istringstream is(traj);
    std::string line;
    std::getline(is, line);  // header
    while (std::getline(is, line)) {
        auto first = line.find(',');
        auto rest = line.substr(first + 1);
        CHECK(rest.rfind("0,0,0", 0) == 0);
    }
}

TEST_CASE("selftest command succeeds") {
    CHECK(cli::run_command({"selftest"}) == 0);
}
