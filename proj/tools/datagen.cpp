#include <cstdint>
#include <filesystem>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "rankscl/errors.hpp"
#include "rankscl/synthetic.hpp"

// Writes <out-dir>/<name>_TRAIN.tsv and <name>_TEST.tsv in the delimited
// layout the rankscl CLI reads.
int main(int argc, char** argv) {
  CLI::App app{"synthetic time series for rankscl", "rankscl-datagen"};
  std::string kind = "sines", out_dir = ".";
  std::uint64_t seed = 0;
  std::size_t per_class = 20;
  app.add_option("kind", kind, "sines | control")->check(CLI::IsMember({"sines", "control"}));
  app.add_option("--out-dir", out_dir);
  app.add_option("--seed", seed);
  app.add_option("--per-class", per_class, "series per class and split (sines only)");
  CLI11_PARSE(app, argc, argv);

  try {
    std::filesystem::create_directories(out_dir);
    const std::filesystem::path dir(out_dir);
    if (kind == "sines") {
      rankscl::SineSpec spec;
      spec.per_class = per_class;
      save_delimited(rankscl::make_sines(spec, seed), dir / "Sines_TRAIN.tsv");
      save_delimited(rankscl::make_sines(spec, seed + 1000), dir / "Sines_TEST.tsv");
    } else {
      const auto [train, test] = rankscl::make_control_chart_split(seed);
      save_delimited(train, dir / "ControlCharts_TRAIN.tsv");
      save_delimited(test, dir / "ControlCharts_TEST.tsv");
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
