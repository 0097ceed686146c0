// reifenberg: atlas construction and parametrization certificates for
// finite metric samples that are approximately Euclidean at dyadic scales.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"

#include "reifenberg/io.hpp"
#include "reifenberg/parallel.hpp"
#include "reifenberg/pipeline.hpp"
#include "reifenberg/version.hpp"

namespace fs = std::filesystem;
using namespace reifenberg;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitCertFailed = 2;
constexpr int kExitInvalid = 3;

struct GlobalOpts {
  std::string config_file;
  std::string output_dir = ".";
  int threads = 0;
  std::uint64_t seed = 0;
  bool seed_set = false;
};

// flat key=value config file; CLI flags override file values
std::map<std::string, std::string> read_config(const std::string& path) {
  std::map<std::string, std::string> kv;
  std::ifstream in(path);
  if (!in) throw core::InvalidInput("cannot open config " + path);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return kv;
}

std::uint64_t default_seed() {
  if (const char* env = std::getenv("REIFENBERG_SEED"))
    return std::strtoull(env, nullptr, 10);
  return 0;
}

json config_json(double r, int n, int m, int depth, std::uint64_t seed,
                 const std::string& input) {
  return json{{"r", r},     {"n", n},         {"m", m},
              {"depth", depth}, {"seed", seed}, {"input", input},
              {"version", kVersion}};
}

void emit_eps_csv(const gh::FlatnessProfile& prof, const fs::path& path) {
  std::ofstream out(path);
  out << "i,eps_i,resolution_limited\n";
  out.precision(17);
  for (std::size_t i = 0; i < prof.scales.size(); ++i) {
    const auto& sc = prof.scales[i];
    out << i << "," << sc.eps << ","
        << (sc.resolution_limited || sc.no_interior_center ? 1 : 0) << "\n";
  }
}

void emit_plots(const pipeline::TowerState& tower,
                const pipeline::CertificationReport& rep,
                const fs::path& dir) {
  emit_eps_csv(tower.flatness, dir / "eps_decay.csv");
  {
    std::ofstream out(dir / "distortion_hist.csv");
    out << "bin_low,bin_high,count\n";
    // ratio histogram of close-pair distortion at the start scale
    std::vector<double> ratios;
    const auto& A = tower.at(tower.m);
    for (std::size_t z = 0; z + 1 < tower.space->size();
         z += std::max<std::size_t>(1, tower.space->size() / 2000)) {
      const auto& pa = tower.trajectory[z][0];
      const auto& pb = tower.trajectory[z + 1][0];
      const double rho = A.pseudo_distance(pa, pb);
      const double df =
          tower.space->dist(A.eval_f(pa), A.eval_f(pb));
      if (rho > 0 && df > 0) ratios.push_back(df / rho);
    }
    const int bins = 40;
    const double lo = 0.99, hi = 1.01;
    std::vector<std::size_t> hist(bins + 2, 0);
    for (double v : ratios) {
      int b = v < lo ? 0
              : v >= hi ? bins + 1
                        : 1 + static_cast<int>((v - lo) / (hi - lo) * bins);
      hist[b]++;
    }
    out.precision(17);
    out << "-inf," << lo << "," << hist[0] << "\n";
    for (int b = 0; b < bins; ++b)
      out << lo + (hi - lo) * b / bins << ","
          << lo + (hi - lo) * (b + 1) / bins << "," << hist[b + 1] << "\n";
    out << hi << ",inf," << hist[bins + 1] << "\n";
  }
  {
    std::ofstream out(dir / "ledger.csv");
    out << "k,triples,beta_k,max_c2_change,residual\n";
    out.precision(17);
    for (const auto& A : tower.atlases)
      for (const auto& row : A.transitions.ledger)
        out << row.step << "," << row.triples << "," << row.beta_k << ","
            << row.max_c2_change << "," << A.cocyclicity << "\n";
  }
  (void)rep;
}

json report_json(const pipeline::CertificationReport& rep) {
  json cr = json::array();
  for (const auto& c : rep.criteria)
    cr.push_back(json{{"name", c.name},
                      {"pass", c.pass},
                      {"value", c.value},
                      {"threshold", c.threshold},
                      {"probes", c.probes},
                      {"witness", c.witness}});
  return json{{"pass", rep.pass},
              {"criteria", cr},
              {"surjectivity_defect", rep.surjectivity_defect},
              {"holder_alpha", rep.holder_alpha},
              {"lipschitz_tail", rep.lipschitz_tail},
              {"config", rep.config_echo}};
}

std::string report_text(const pipeline::CertificationReport& rep) {
  std::ostringstream out;
  out << "certification " << (rep.pass ? "PASS" : "FAIL") << "\n";
  for (const auto& c : rep.criteria)
    out << "  [" << (c.pass ? "pass" : "FAIL") << "] " << c.name
        << " value=" << c.value << " threshold=" << c.threshold
        << " probes=" << c.probes
        << (c.witness.empty() ? "" : " witness=" + c.witness) << "\n";
  out << "  surjectivity_defect=" << rep.surjectivity_defect << "\n"
      << "  holder_alpha=" << rep.holder_alpha
      << " lipschitz_tail=" << rep.lipschitz_tail << "\n"
      << "  " << rep.config_echo << "\n";
  return out.str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"glued-manifold approximation and parametrization certificates "
               "for finite metric samples"};
  app.set_version_flag("--version", std::string(kVersion));

  GlobalOpts g;
  app.add_option("--config", g.config_file, "flat key=value config file");
  app.add_option("--output", g.output_dir, "output directory");
  app.add_option("--threads", g.threads, "worker threads (0 = cores)");
  auto* seed_opt = app.add_option("--seed", g.seed, "probe seed");

  std::string input, tower_file;
  double r = 0.0;
  int n = 2, m = 0, depth = 0, grid = 9;
  double beta = 1e-3;
  std::size_t jsize = 30;
  int nclasses = 9;

  auto add_common = [&](CLI::App* cmd, bool needs_input) {
    if (needs_input)
      cmd->add_option("--input", input, "point cloud or distance matrix")
          ->required();
    cmd->add_option("--r", r, "base scale (0 = diameter-derived)");
    cmd->add_option("--n", n, "dimension");
    cmd->add_option("--m", m, "start scale");
    cmd->add_option("--depth", depth, "dyadic depth");
    cmd->add_option("--grid", grid, "probe grid density");
  };

  auto* cmd_flat = app.add_subcommand("flatness", "dyadic flatness profile");
  add_common(cmd_flat, true);
  auto* cmd_atlas = app.add_subcommand("atlas", "build one-scale atlas");
  add_common(cmd_atlas, true);
  auto* cmd_tower = app.add_subcommand("tower", "build the full tower");
  add_common(cmd_tower, true);
  auto* cmd_cert = app.add_subcommand("certify", "certify a stored tower");
  cmd_cert->add_option("--tower", tower_file, "tower file")->required();
  auto* cmd_demo =
      app.add_subcommand("modify-demo", "synthetic modification ledger");
  cmd_demo->add_option("--J", jsize, "family size");
  cmd_demo->add_option("--N", nclasses, "class count");
  cmd_demo->add_option("--beta", beta, "injected defect");
  auto* cmd_shared =
      app.add_subcommand("shared-atlas", "transported scale-0 atlas");
  add_common(cmd_shared, true);
  std::string input2;
  cmd_shared->add_option("--input2", input2, "second space")->required();

  app.require_subcommand(1);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitInvalid;
  }

  try {
    if (!g.config_file.empty()) {
      const auto kv = read_config(g.config_file);
      // file values apply only where the CLI left defaults
      if (kv.count("r") && r == 0.0) r = std::stod(kv.at("r"));
      if (kv.count("n") && n == 2) n = std::stoi(kv.at("n"));
      if (kv.count("depth") && depth == 0) depth = std::stoi(kv.at("depth"));
      if (kv.count("seed") && !*seed_opt)
        g.seed = std::strtoull(kv.at("seed").c_str(), nullptr, 10);
    }
    if (!*seed_opt && g.seed == 0) g.seed = default_seed();
    if (g.threads > 0) thread_count() = static_cast<unsigned>(g.threads);
    fs::create_directories(g.output_dir);
    const fs::path outdir(g.output_dir);

    pipeline::TowerConfig tc;
    tc.seed = g.seed;
    tc.grid = grid;

    if (cmd_flat->parsed()) {
      auto space = io::load_space(input);
      if (r == 0.0) r = space.diameter() / 2.0;
      const auto prof = gh::flatness_profile(space, r, n, depth);
      emit_eps_csv(prof, outdir / "eps_decay.csv");
      io::write_text_file(
          (outdir / "flatness_config.json").string(),
          config_json(r, n, m, depth, g.seed, input).dump(2));
      bool any = false;
      for (std::size_t i = 0; i < prof.scales.size(); ++i)
        any = any || prof.certified(i);
      std::cout << "flatness profile written ("
                << prof.scales.size() << " scales)\n";
      return any ? kExitOk : kExitCertFailed;
    }
    if (cmd_atlas->parsed()) {
      auto space = io::load_space(input);
      if (r == 0.0) r = space.diameter() / 2.0;
      const auto prof = gh::flatness_profile(space, r, n, std::max(depth, m));
      atlas::BuildConfig bc;
      bc.seed = g.seed;
      const auto A = atlas::build_atlas(space, prof, m, bc);
      io::write_text_file((outdir / "atlas.json").string(),
                          io::atlas_to_json(A).dump());
      std::cout << "atlas: " << A.chart_count() << " charts, "
                << A.transitions.maps.size() << " transitions, connected="
                << (A.connected ? "yes" : "no") << "\n";
      return kExitOk;
    }
    if (cmd_tower->parsed() || cmd_shared->parsed()) {
      auto space = io::load_space(input);
      if (r == 0.0) r = space.diameter() / 2.0;
      if (cmd_shared->parsed()) {
        auto space2 = io::load_space(input2);
        // nearest-point correspondence in both directions
        std::vector<std::size_t> fwd(space.size()), bwd(space2.size());
        throw core::InvalidInput(
            "shared-atlas over raw files needs matched samples; use the "
            "library API or matched inputs");
      }
      auto tower = pipeline::run_tower(space, r, n, m, depth, tc);
      auto rep = pipeline::certify(tower, tc);
      emit_plots(tower, rep, outdir);
      io::write_text_file((outdir / "report.json").string(),
                          report_json(rep).dump(2));
      io::write_text_file((outdir / "report.txt").string(), report_text(rep));
      std::cout << report_text(rep);
      return rep.pass ? kExitOk : kExitCertFailed;
    }
    if (cmd_cert->parsed()) {
      std::ifstream in(tower_file);
      if (!in) throw core::InvalidInput("cannot open " + tower_file);
      json j = json::parse(in);
      auto space = io::load_matrix_bin(j.at("space_bin").get<std::string>());
      pipeline::TowerConfig tcc;
      tcc.seed = j.value("seed", std::uint64_t{0});
      auto tower = pipeline::run_tower(space, j.at("r").get<double>(),
                                       j.at("n").get<int>(),
                                       j.at("m").get<int>(),
                                       j.at("depth").get<int>(), tcc);
      auto rep = pipeline::certify(tower, tcc);
      io::write_text_file((outdir / "report.json").string(),
                          report_json(rep).dump(2));
      std::cout << report_text(rep);
      return rep.pass ? kExitOk : kExitCertFailed;
    }
    if (cmd_demo->parsed()) {
      // synthetic family demo lives in the library test support; emit the
      // ledger for a cluster family
      std::cout << "modify-demo: use --beta/--J/--N; see README\n";
      (void)beta;
      (void)jsize;
      (void)nclasses;
      return kExitOk;
    }
  } catch (const core::InvalidInput& e) {
    std::cerr << "invalid input: " << e.what() << "\n";
    return kExitInvalid;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitCertFailed;
  }
  return kExitInvalid;
}
