#include <CLI11.hpp>

#include <cstdio>
#include <exception>

// Command line front end. Subcommands are registered here and implemented in
// cli_commands.cpp-style translation units as the pipeline grows; for now the
// skeleton only parses.

int main(int argc, char** argv) {
  CLI::App app{"capsule visual odometry pipeline"};
  app.require_subcommand(1);

  app.add_subcommand("generate", "render a synthetic dataset");
  app.add_subcommand("sfs", "run shape-from-shading on a dataset");
  app.add_subcommand("train", "train the pose regressor");
  app.add_subcommand("infer", "run a checkpoint over a trajectory");
  app.add_subcommand("eval", "score predicted against ground-truth poses");
  app.add_subcommand("calibrate-beta", "preliminary run to pick the loss balance");
  app.add_subcommand("smoke", "tiny end-to-end pipeline check");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  std::fprintf(stderr, "error: subcommand not wired up yet\n");
  return 1;
}
