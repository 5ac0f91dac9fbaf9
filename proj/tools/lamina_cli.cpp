// lamina: laminate constructions and orientation repair for matrix fields.
//
// Subcommands mirror the library pipelines; every artifact is deterministic
// for a fixed invocation (see README for the output file map).

#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "lamina/cli.hpp"

namespace {

// "2..14" or "2,5,9"
std::vector<int> parse_levels_list(const std::string& text) {
  std::vector<int> out;
  auto range_pos = text.find("..");
  if (range_pos != std::string::npos) {
    int lo = std::stoi(text.substr(0, range_pos));
    int hi = std::stoi(text.substr(range_pos + 2));
    for (int j = lo; j <= hi; ++j) out.push_back(j);
    return out;
  }
  std::size_t start = 0;
  while (start <= text.size()) {
    auto comma = text.find(',', start);
    std::string tok = text.substr(start, comma - start);
    if (!tok.empty()) out.push_back(std::stoi(tok));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

std::vector<double> parse_real_list(const std::string& text) {
  std::vector<double> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    auto comma = text.find(',', start);
    std::string tok = text.substr(start, comma - start);
    if (!tok.empty()) out.push_back(std::stod(tok));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"laminate constructions and orientation repair"};
  app.require_subcommand(1);

  lamina::RunConfig cfg;
  std::string scan_p_text, scan_levels_text;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--seed", cfg.seed, "PRNG seed (splitmix64 stream)");
    cmd->add_option("--emit-dir", cfg.emit_dir, "artifact directory");
  };

  auto* zero = app.add_subcommand("zero-det",
                                  "cascade a negative-determinant matrix onto "
                                  "the zero-determinant set");
  zero->add_option("--matrix", cfg.matrix_arg, "matrix JSON or file")->required();
  zero->add_option("--levels", cfg.levels, "cascade depth j");
  zero->add_option("--verify", cfg.verify_p, "verify the estimate suite at this p");
  zero->add_option("--scan", scan_p_text, "comma-separated p grid for a moment scan");
  zero->add_option("--levels-grid", scan_levels_text, "level grid, e.g. 2..14");
  add_common(zero);

  auto* shift = app.add_subcommand("delta-shift",
                                   "shift a matrix onto |det| >= delta^d");
  shift->add_option("--matrix", cfg.matrix_arg, "matrix JSON or file")->required();
  shift->add_option("--delta", cfg.delta, "shift radius")->required();
  shift->add_option("--verify", cfg.verify_p, "verify the estimate suite at this p");
  add_common(shift);

  auto add_field_opts = [&](CLI::App* cmd) {
    cmd->add_option("--field", cfg.field_arg, "field JSON file");
    cmd->add_option("--gen", cfg.gen, "generator: constant | vortex | random");
    cmd->add_option("--matrix", cfg.matrix_arg, "matrix for --gen constant");
    cmd->add_option("--n", cfg.n, "grid resolution");
    cmd->add_option("--d", cfg.d, "dimension for vortex/random generators");
    cmd->add_option("--mix", cfg.mix, "negative-determinant fraction (random)");
    cmd->add_option("--p", cfg.p, "integrability exponent");
  };

  auto* repair = app.add_subcommand("repair", "weak orientation repair");
  add_field_opts(repair);
  repair->add_option("--l-max", cfg.l_max, "lamination iterations");
  repair->add_option("--j0", cfg.j0, "cascade depth schedule offset");
  add_common(repair);

  auto* strict = app.add_subcommand("strict-repair", "strict orientation repair");
  add_field_opts(strict);
  strict->add_option("--l-max", cfg.strict_l_max, "shift iterations");
  strict->add_option("--delta0", cfg.delta0, "initial shift radius");
  strict->add_option("--budget", cfg.budget, "total drift budget");
  strict->add_option("--j-inner", cfg.j_inner, "inner cascade depth");
  add_common(strict);

  auto* scan = app.add_subcommand("rigidity-scan",
                                  "moment growth scan over (p, level)");
  scan->add_option("--matrix", cfg.matrix_arg, "matrix JSON or file")->required();
  scan->add_option("--p", scan_p_text, "comma-separated p grid")->required();
  scan->add_option("--levels", scan_levels_text, "level grid, e.g. 2..14")->required();
  add_common(scan);

  auto* realize = app.add_subcommand("realize",
                                     "piecewise-affine map realizing a laminate");
  realize->add_option("--laminate", cfg.laminate_arg, "laminate JSON file")->required();
  realize->add_option("--epsilon", cfg.epsilon, "fine-scale ratio in (0, 1/4)");
  realize->add_option("--depth", cfg.depth, "depth cap (<= 3)");
  realize->add_option("--periods", cfg.periods, "top-level band periods");
  realize->add_option("--grid-samples", cfg.grid_samples, "grid.csv resolution");
  add_common(realize);

  auto* energy = app.add_subcommand("energy",
                                    "energy tracking along the repair pipeline");
  add_field_opts(energy);
  energy->add_option("--integrand", cfg.integrand,
                     "pnorm:<p> | det | negdetq:<q> | composite:<c1>:<p>:<c2>");
  energy->add_option("--l-max", cfg.l_max, "weak lamination iterations");
  energy->add_option("--j0", cfg.j0, "weak cascade schedule offset");
  energy->add_option("--strict-l-max", cfg.strict_l_max, "strict iterations");
  energy->add_option("--delta0", cfg.delta0, "initial shift radius");
  energy->add_option("--budget", cfg.budget, "strict drift budget");
  energy->add_option("--j-inner", cfg.j_inner, "inner cascade depth");
  add_common(energy);

  auto* suite = app.add_subcommand("verify-suite", "run the acceptance battery");
  add_common(suite);

  CLI11_PARSE(app, argc, argv);

  cfg.command = app.get_subcommands().front()->get_name();
  try {
    if (!scan_p_text.empty()) cfg.scan_p = parse_real_list(scan_p_text);
    if (!scan_levels_text.empty())
      cfg.scan_levels = parse_levels_list(scan_levels_text);
  } catch (const std::exception&) {
    std::cerr << "error: ConfigInvalid: malformed p or level grid\n";
    return 1;
  }
  return lamina::dispatch(cfg);
}
