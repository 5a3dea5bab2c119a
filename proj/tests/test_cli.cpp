#include <doctest.h>

#include <fstream>
#include <sstream>

#include "ssml/cli.hpp"
#include "support.hpp"

using ssml::testing::TempDir;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run ssml_run(std::vector<std::string> args) {
  args.insert(args.begin(), "ssml");
  std::ostringstream out, err;
  const int code = ssml::cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

std::string gen_small(const TempDir& dir, const std::string& name = "c",
                      const std::string& seed = "5") {
  const std::string prefix = (dir / name).string();
  const Run r = ssml_run({"gen", "--identities", "6", "--per-id", "5", "--din", "8",
                          "--noise", "0.1", "--seed", seed, "-o", prefix});
  REQUIRE(r.code == 0);
  return prefix;
}

std::vector<std::string> small_train_flags(const std::string& prefix) {
  return {"--features", prefix + ".features", "--labels", prefix + ".labels",
          "--epochs",   "3",  "--batch", "8", "--warmup", "1", "--reinit", "2",
          "--dout",     "4",  "--gamma", "0.2", "--quiet"};
}

}  // namespace

TEST_CASE("gen writes identical files for identical seeds") {
  TempDir dir("cli_gen");
  const std::string a = gen_small(dir, "a");
  const std::string b = gen_small(dir, "b");
  const std::string c = gen_small(dir, "c", "6");
  CHECK(slurp(a + ".features") == slurp(b + ".features"));
  CHECK(slurp(a + ".labels") == slurp(b + ".labels"));
  CHECK(slurp(a + ".features") != slurp(c + ".features"));

  const Run r = ssml_run({"gen", "--identities", "2", "--per-id", "3", "--din", "4", "-o",
                          (dir / "d").string()});
  CHECK(r.code == 0);
  CHECK(r.out.find("(6x4)") != std::string::npos);
}

TEST_CASE("out-of-range flags exit with a validation error") {
  TempDir dir("cli_bad");
  const std::string prefix = gen_small(dir);
  auto flags = small_train_flags(prefix);
  flags.insert(flags.begin(), "train");

  auto with = [&](const std::string& flag, const std::string& value) {
    auto args = flags;
    args.push_back(flag);
    args.push_back(value);
    return ssml_run(args);
  };
  const Run tau = with("--tau", "1.5");
  CHECK(tau.code == ssml::cli::kExitValidation);
  CHECK(tau.err.find("--tau") != std::string::npos);
  CHECK(tau.err.find("(0, 1]") != std::string::npos);

  CHECK(with("--gamma", "0").code == ssml::cli::kExitValidation);
  CHECK(with("--sigma", "2").code == ssml::cli::kExitValidation);
  CHECK(with("--loss", "softmax").code == ssml::cli::kExitValidation);
  CHECK(with("--mining", "random").code == ssml::cli::kExitValidation);
  CHECK(ssml_run({"train"}).code == ssml::cli::kExitValidation);
  CHECK(ssml_run({"bogus"}).code == ssml::cli::kExitValidation);
}

TEST_CASE("runtime failures exit with code 2") {
  TempDir dir("cli_missing");
  const Run r = ssml_run({"train", "--features", (dir / "nope.features").string()});
  CHECK(r.code == ssml::cli::kExitRuntime);
  CHECK(r.err.rfind("error: ", 0) == 0);
}

TEST_CASE("help lists the default hyperparameters") {
  const Run r = ssml_run({"train", "--help"});
  CHECK(r.code == 0);
  const std::string text = r.out + r.err;
  CHECK(text.find("--tau") != std::string::npos);
  CHECK(text.find("0.6") != std::string::npos);
  CHECK(text.find("0.01") != std::string::npos);
  CHECK(text.find("0.2") != std::string::npos);
  CHECK(text.find("--config") != std::string::npos);
}

TEST_CASE("train writes the same report and checkpoint on every run") {
  TempDir dir("cli_train");
  const std::string prefix = gen_small(dir);
  auto args = small_train_flags(prefix);
  args.insert(args.begin(), "train");
  args.push_back("--checkpoint");
  args.push_back((dir / "m.ckpt").string());

  const Run first = ssml_run(args);
  REQUIRE(first.code == 0);
  const std::string ckpt = slurp(dir / "m.ckpt");
  const Run second = ssml_run(args);
  REQUIRE(second.code == 0);
  CHECK(first.out == second.out);
  CHECK(ckpt == slurp(dir / "m.ckpt"));
  CHECK(first.err.empty());
  CHECK(first.out.rfind("epoch,", 0) == 0);
  // header plus one row per epoch
  CHECK(std::count(first.out.begin(), first.out.end(), '\n') == 4);

  args.pop_back();
  args.pop_back();
  args.erase(std::find(args.begin(), args.end(), "--quiet"));
  args.push_back("--report");
  args.push_back((dir / "r.csv").string());
  const Run loud = ssml_run(args);
  REQUIRE(loud.code == 0);
  CHECK(loud.out.empty());
  CHECK(slurp(dir / "r.csv") == first.out);
  CHECK(loud.err.rfind("epoch=0 batch=0 loss=", 0) == 0);
}

TEST_CASE("config file values are overridden by flags") {
  TempDir dir("cli_config");
  const std::string prefix = gen_small(dir);
  {
    std::ofstream cfg(dir / "run.cfg");
    cfg << "# small run\n"
        << "features = " << prefix << ".features\n"
        << "labels=" << prefix << ".labels\n"
        << "epochs=3\nbatch=8\nwarmup=1\nreinit=2\ndout=4\ngamma=0.2\n\n"
        << "tau=1.5\n";
  }
  const std::string cfg = (dir / "run.cfg").string();
  CHECK(ssml_run({"train", "--config", cfg, "--quiet"}).code == ssml::cli::kExitValidation);

  const Run via_config = ssml_run({"train", "--config", cfg, "--tau", "0.6", "--quiet"});
  REQUIRE(via_config.code == 0);
  auto args = small_train_flags(prefix);
  args.insert(args.begin(), "train");
  CHECK(ssml_run(args).out == via_config.out);

  {
    std::ofstream broken(dir / "broken.cfg");
    broken << "epochs 3\n";
  }
  const Run broken = ssml_run({"train", "--config", (dir / "broken.cfg").string()});
  CHECK(broken.code == ssml::cli::kExitValidation);
  CHECK(broken.err.find("line 1") != std::string::npos);
}

TEST_CASE("mine prints one line per sample") {
  TempDir dir("cli_mine");
  const std::string prefix = gen_small(dir);
  const Run r = ssml_run({"mine", "--features", prefix + ".features", "--gamma", "0.2",
                          "--threads", "1"});
  REQUIRE(r.code == 0);
  std::istringstream lines(r.out);
  std::string line;
  int count = 0;
  while (std::getline(lines, line)) {
    CHECK(line.rfind(std::to_string(count) + "\tP+:", 0) == 0);
    CHECK(line.find("\tNhard:") != std::string::npos);
    ++count;
  }
  CHECK(count == 30);
  CHECK(ssml_run({"mine", "--features", prefix + ".features", "--kind", "ps"}).code == 0);
}

TEST_CASE("eval reports retrieval and mining quality") {
  TempDir dir("cli_eval");
  const std::string prefix = gen_small(dir);
  const Run r = ssml_run({"eval", "--features", prefix + ".features", "--labels",
                          prefix + ".labels", "--epoch", "7"});
  REQUIRE(r.code == 0);
  CHECK(r.out.rfind("epoch,", 0) == 0);
  CHECK(r.out.find("\n7,") != std::string::npos);
  CHECK(std::count(r.out.begin(), r.out.end(), '\n') == 2);

  const Run missing = ssml_run({"eval", "--features", prefix + ".features"});
  CHECK(missing.code == ssml::cli::kExitValidation);
}

TEST_CASE("ablate writes one row per cell") {
  TempDir dir("cli_ablate");
  const std::string prefix = gen_small(dir);
  auto args = small_train_flags(prefix);
  args.insert(args.begin(), "ablate");
  args.insert(args.end(), {"--losses", "dtl,triplet", "--minings", "ps,pos"});
  const Run r = ssml_run(args);
  REQUIRE(r.code == 0);
  CHECK(r.out.rfind("loss,mining,rank1,rank5,map\n", 0) == 0);
  CHECK(std::count(r.out.begin(), r.out.end(), '\n') == 5);
  CHECK(r.out.find("\ntriplet,pos,") != std::string::npos);

  args.push_back("--minings");
  args.push_back("random");
  CHECK(ssml_run(args).code != 0);
}
