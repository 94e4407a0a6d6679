// dualgame <command> <game-file> [flags]: runs one solver operation on a game file, prints a
// short summary and writes the JSON report.

#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "dualgame/cli_reports.hpp"

namespace {

std::vector<double> parse_point(const std::string& s)
{
   std::vector<double> out;
   std::stringstream in(s);
   std::string item;
   while(std::getline(in, item, ','))
      out.push_back(std::stod(item));
   return out;
}

}  // namespace

int main(int argc, char** argv)
{
   CLI::App app{"Solver for repeated zero-sum games with incomplete information on both sides"};
   std::string command, path, out, x;
   std::size_t grid = 0, tau_grid = 0, x_grid = 0, horizon_cap = 0, threads = 0;
   std::uint64_t seed = 0;
   bool cross_check = false, quiet = false;

   std::string names;
   for(const auto& c : dualgame::commands())
      names += (names.empty() ? "" : ", ") + c;
   app.add_option("command", command, "one of: " + names)->required();
   app.add_option("game-file", path, "game description")->required()->check(CLI::ExistingFile);
   auto* o_grid = app.add_option("--grid", grid, "p-grid subdivisions")->check(CLI::PositiveNumber);
   auto* o_tau = app.add_option("--tau-grid", tau_grid, "tau-grid subdivisions")->check(CLI::PositiveNumber);
   auto* o_x = app.add_option("--x-grid", x_grid, "x-grid subdivisions")->check(CLI::PositiveNumber);
   auto* o_cap = app.add_option("--horizon-cap", horizon_cap, "keep only the first N stages")->check(CLI::PositiveNumber);
   auto* o_threads = app.add_option("--threads", threads, "worker threads")->check(CLI::PositiveNumber);
   auto* o_seed = app.add_option("--seed", seed, "seed of the refinement jitter");
   auto* o_point = app.add_option("--x", x, "dual point, comma separated (solve-dual, nonrevealing, independent)");
   app.add_option("--out", out, "report path (default <game-file>.<command>.json)");
   app.add_flag("--cross-check", cross_check, "also run the independent oracle check");
   app.add_flag("--quiet", quiet, "no summary on stdout");

   try {
      app.parse(argc, argv);
   } catch(const CLI::ParseError& e) {
      const int code = app.exit(e);
      return code == 0 ? 0 : 2;
   }

   dualgame::RunFlags flags;
   if(*o_grid)
      flags.grid = grid;
   if(*o_tau)
      flags.tau_grid = tau_grid;
   if(*o_x)
      flags.x_grid = x_grid;
   if(*o_cap)
      flags.horizon_cap = horizon_cap;
   if(*o_threads)
      flags.threads = threads;
   if(*o_seed)
      flags.seed = seed;
   flags.cross_check = cross_check;

   try {
      if(*o_point) {
         try {
            flags.x = parse_point(x);
         } catch(const std::exception&) {
            throw dualgame::DomainError("--x: expected comma-separated numbers, found '" + x + "'");
         }
      }
      std::ifstream in(path);
      std::stringstream text;
      text << in.rdbuf();
      const dualgame::GameFile file = dualgame::parse_game(text.str());
      const dualgame::Report rep = dualgame::run(command, file, flags);
      if(out.empty())
         out = path + "." + command + ".json";
      std::ofstream report(out);
      report << rep.json.dump(2) << '\n';
      if(!report)
         throw dualgame::ResourceError("could not write the report to " + out, 0, 0);
      if(!quiet)
         std::cout << rep.summary << "report " << out << '\n';
      return rep.exit_code;
   } catch(const std::exception& e) {
      std::cerr << "dualgame: " << e.what() << '\n';
      const std::string hint = dualgame::remediation_hint(e);
      if(!hint.empty())
         std::cerr << "hint: " << hint << '\n';
      return dualgame::exit_code_for(e);
   }
}
