#ifndef DUALGAME_CLI_REPORTS_HPP
#define DUALGAME_CLI_REPORTS_HPP

// Game files, command dispatch and JSON reports. The grammar is documented in docs/grammar.md
// and the report schema in docs/report-format.md.

#include <algorithm>
#include <charconv>
#include <cctype>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "dualgame/dual_solver.hpp"
#include "dualgame/errors.hpp"
#include "dualgame/game_core.hpp"
#include "dualgame/oracle.hpp"
#include "dualgame/strategy_synth.hpp"

namespace dualgame {

struct GameOptions {
   std::size_t grid = 0;  // 0: chosen from K
   std::size_t tau_grid = 8;
   std::size_t x_grid = 16;
   std::size_t strategy_grid = 8;
   std::size_t refine_factor = 4;  // 1 disables the refinement pass
   std::size_t jitter = 8;
   std::size_t horizon_cap = 0;  // 0: no cap
   std::size_t sequence_cap = 4096;
   std::size_t history_cap = kDefaultHistoryCap;
   std::size_t threads = 1;
   std::uint64_t seed = 0;

   friend bool operator==(const GameOptions&, const GameOptions&) = default;

   [[nodiscard]] OracleOptions oracle() const
   {
      OracleOptions o;
      o.sequence_cap = sequence_cap;
      o.history_cap = history_cap;
      o.strategy_grid = strategy_grid;
      o.threads = threads;
      return o;
   }

   [[nodiscard]] DualConfig dual() const
   {
      DualConfig c;
      c.p_grid = grid;
      c.tau_grid = tau_grid;
      c.x_grid = x_grid;
      c.refine = refine_factor > 1;
      c.refine_factor = refine_factor;
      c.jitter = jitter;
      c.seed = seed;
      c.threads = threads;
      c.oracle = oracle();
      return c;
   }
};

/// The evaluation as written: uniform n, discounted lambda n, or explicit weights.
struct EvaluationSpec {
   enum class Kind { kUniform, kDiscounted, kWeights };
   Kind kind = Kind::kUniform;
   std::size_t horizon = 1;
   double lambda = 1.0;
   Vector weights;  // kWeights only

   friend bool operator==(const EvaluationSpec&, const EvaluationSpec&) = default;

   /// The evaluation to solve, cut to `cap` stages when cap > 0.
   [[nodiscard]] Truncation resolve(std::size_t cap) const
   {
      Vector w;
      switch(kind) {
         case Kind::kUniform: w = uniform(horizon); break;
         case Kind::kDiscounted: return discounted(lambda, cap > 0 ? std::min(cap, horizon) : horizon);
         case Kind::kWeights: w = weights; break;
      }
      return truncate(w, cap > 0 ? std::min(cap, w.size()) : w.size());
   }
};

struct GameFile {
   GameSpec game;
   JointBelief prior;
   EvaluationSpec evaluation;
   GameOptions options;

   friend bool operator==(const GameFile&, const GameFile&) = default;
};

namespace detail {

struct Token {
   std::string text;
   std::size_t column;
};

struct Line {
   std::size_t number;
   std::vector<Token> tokens;
};

inline std::vector<Line> tokenize(std::string_view text)
{
   std::vector<Line> out;
   std::size_t number = 0, pos = 0;
   while(pos <= text.size()) {
      std::size_t end = text.find('\n', pos);
      if(end == std::string_view::npos)
         end = text.size();
      std::string_view line = text.substr(pos, end - pos);
      ++number;
      if(auto hash = line.find('#'); hash != std::string_view::npos)
         line = line.substr(0, hash);
      Line l{number, {}};
      std::size_t c = 0;
      while(c < line.size()) {
         while(c < line.size() && std::isspace(static_cast<unsigned char>(line[c])))
            ++c;
         const std::size_t start = c;
         while(c < line.size() && !std::isspace(static_cast<unsigned char>(line[c])))
            ++c;
         if(c > start)
            l.tokens.push_back(Token{std::string(line.substr(start, c - start)), start + 1});
      }
      if(!l.tokens.empty())
         out.push_back(std::move(l));
      if(end == text.size())
         break;
      pos = end + 1;
   }
   return out;
}

inline double parse_real(const Line& line, const Token& t)
{
   auto one = [&](const std::string& s) {
      std::size_t used = 0;
      double v = 0.0;
      try {
         v = std::stod(s, &used);
      } catch(const std::exception&) {
         used = 0;
      }
      if(used != s.size() || s.empty() || !std::isfinite(v))
         throw ParseError(line.number, t.column, "expected a number, found '" + t.text + "'");
      return v;
   };
   if(auto slash = t.text.find('/'); slash != std::string::npos) {
      const double den = one(t.text.substr(slash + 1));
      if(den == 0.0)
         throw ParseError(line.number, t.column, "zero denominator in '" + t.text + "'");
      return one(t.text.substr(0, slash)) / den;
   }
   return one(t.text);
}

inline std::uint64_t parse_count(const Line& line, const Token& t)
{
   const std::string& s = t.text;
   std::uint64_t v = 0;
   const auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
   if(s.empty() || ec != std::errc{} || end != s.data() + s.size())
      throw ParseError(line.number, t.column, "expected a nonnegative integer below 2^64, found '" + s + "'");
   return v;
}

inline std::vector<double> parse_reals(const Line& line, std::size_t from, std::size_t expected,
                                       const char* what)
{
   if(line.tokens.size() - from != expected)
      throw ParseError(line.number, 0,
                       std::string(what) + ": expected " + std::to_string(expected) + " numbers, found "
                           + std::to_string(line.tokens.size() - from));
   std::vector<double> v;
   for(std::size_t a = from; a < line.tokens.size(); ++a)
      v.push_back(parse_real(line, line.tokens[a]));
   return v;
}

inline std::string format_real(double v)
{
   char buf[40];
   std::snprintf(buf, sizeof buf, "%.17g", v == 0.0 ? 0.0 : v);
   return buf;
}

}  // namespace detail

inline GameFile parse_game(std::string_view text)
{
   using detail::Line;
   const std::vector<Line> lines = detail::tokenize(text);
   std::size_t at = 0;
   std::size_t K = 0, L = 0, I = 0, J = 0;
   bool have_sizes = false;
   std::optional<std::vector<double>> payoff;
   std::optional<Matrix> prior;
   std::size_t prior_line = 0;
   std::optional<EvaluationSpec> evaluation;
   GameOptions options;

   auto need_sizes = [&](const Line& l) {
      if(!have_sizes)
         throw ParseError(l.number, 1, "'sizes' must come before '" + l.tokens[0].text + "'");
   };
   // Lines of a block up to its `end`.
   auto block = [&](const Line& head) {
      std::vector<const Line*> body;
      while(true) {
         if(at >= lines.size())
            throw ParseError(head.number, 1, "block '" + head.tokens[0].text + "' is not closed by 'end'");
         const Line& l = lines[at++];
         if(l.tokens[0].text == "end") {
            if(l.tokens.size() > 1)
               throw ParseError(l.number, l.tokens[1].column, "unexpected text after 'end'");
            return body;
         }
         body.push_back(&l);
      }
   };

   while(at < lines.size()) {
      const Line& l = lines[at++];
      const std::string& key = l.tokens[0].text;
      if(key == "sizes") {
         if(have_sizes)
            throw ParseError(l.number, 1, "duplicate 'sizes'");
         if(l.tokens.size() != 5)
            throw ParseError(l.number, 0, "sizes: expected K L I J");
         K = detail::parse_count(l, l.tokens[1]);
         L = detail::parse_count(l, l.tokens[2]);
         I = detail::parse_count(l, l.tokens[3]);
         J = detail::parse_count(l, l.tokens[4]);
         for(std::size_t a = 1; a < 5; ++a)
            if(detail::parse_count(l, l.tokens[a]) == 0)
               throw ParseError(l.number, l.tokens[a].column, "set sizes must be positive");
         have_sizes = true;
      } else if(key == "payoff") {
         need_sizes(l);
         if(payoff)
            throw ParseError(l.number, 1, "duplicate 'payoff' block");
         if(l.tokens.size() != 1)
            throw ParseError(l.number, l.tokens[1].column, "unexpected text after 'payoff'");
         const auto body = block(l);
         if(body.size() != K * L)
            throw ParseError(l.number, 0,
                             "payoff: expected " + std::to_string(K * L) + " rows (one per (k, l)), found "
                                 + std::to_string(body.size()));
         payoff.emplace();
         for(const Line* row : body) {
            auto v = detail::parse_reals(*row, 0, I * J, "payoff row");
            payoff->insert(payoff->end(), v.begin(), v.end());
         }
      } else if(key == "prior") {
         need_sizes(l);
         if(prior)
            throw ParseError(l.number, 1, "duplicate 'prior' block");
         if(l.tokens.size() != 2 || (l.tokens[1].text != "joint" && l.tokens[1].text != "conditional"))
            throw ParseError(l.number, 0, "prior: expected 'prior joint' or 'prior conditional'");
         const bool joint = l.tokens[1].text == "joint";
         const auto body = block(l);
         prior_line = l.number;
         Matrix pi(K, L);
         if(joint) {
            if(body.size() != K)
               throw ParseError(l.number, 0, "prior joint: expected " + std::to_string(K) + " rows");
            for(std::size_t k = 0; k < K; ++k) {
               auto v = detail::parse_reals(*body[k], 0, L, "prior row");
               for(std::size_t a = 0; a < L; ++a) {
                  if(v[a] < 0.0)
                     throw ParseError(body[k]->number, body[k]->tokens[a].column, "prior entries must be nonnegative");
                  pi(k, a) = v[a];
               }
            }
         } else {
            if(body.size() != K + 1 || body[0]->tokens[0].text != "marginal")
               throw ParseError(l.number, 0,
                                "prior conditional: expected a 'marginal' line and " + std::to_string(K) + " rows");
            const auto p = detail::parse_reals(*body[0], 1, K, "marginal");
            if(!is_probability(p))
               throw InvariantError("line " + std::to_string(body[0]->number) + ": prior marginal sums to "
                                    + detail::format_real(sum(p)) + ", expected 1");
            for(std::size_t k = 0; k < K; ++k) {
               auto q = detail::parse_reals(*body[k + 1], 0, L, "prior row");
               if(!is_probability(q))
                  throw InvariantError("line " + std::to_string(body[k + 1]->number) + ": prior row "
                                       + std::to_string(k + 1) + " sums to " + detail::format_real(sum(q))
                                       + ", expected 1");
               for(std::size_t a = 0; a < L; ++a)
                  pi(k, a) = p[k] * q[a];
            }
         }
         prior = std::move(pi);
      } else if(key == "evaluation") {
         if(evaluation)
            throw ParseError(l.number, 1, "duplicate 'evaluation'");
         if(l.tokens.size() < 2)
            throw ParseError(l.number, 0, "evaluation: expected 'uniform N', 'discounted LAMBDA N' or 'weights ...'");
         EvaluationSpec e;
         const std::string& kind = l.tokens[1].text;
         if(kind == "uniform" && l.tokens.size() == 3) {
            e.kind = EvaluationSpec::Kind::kUniform;
            e.horizon = detail::parse_count(l, l.tokens[2]);
         } else if(kind == "discounted" && l.tokens.size() == 4) {
            e.kind = EvaluationSpec::Kind::kDiscounted;
            e.lambda = detail::parse_real(l, l.tokens[2]);
            e.horizon = detail::parse_count(l, l.tokens[3]);
            if(!(e.lambda > 0.0 && e.lambda <= 1.0))
               throw ParseError(l.number, l.tokens[2].column, "discount factor must lie in (0, 1]");
         } else if(kind == "weights" && l.tokens.size() >= 3) {
            e.kind = EvaluationSpec::Kind::kWeights;
            e.weights = detail::parse_reals(l, 2, l.tokens.size() - 2, "weights");
            e.horizon = e.weights.size();
            if(!is_probability(e.weights))
               throw InvariantError("line " + std::to_string(l.number) + ": evaluation weights sum to "
                                    + detail::format_real(sum(e.weights)) + ", expected 1");
         } else {
            throw ParseError(l.number, l.tokens[1].column,
                             "evaluation: expected 'uniform N', 'discounted LAMBDA N' or 'weights ...'");
         }
         if(e.horizon == 0)
            throw ParseError(l.number, 0, "evaluation: horizon must be positive");
         evaluation = std::move(e);
      } else if(key == "options") {
         for(const Line* o : block(l)) {
            if(o->tokens.size() != 2)
               throw ParseError(o->number, 0, "option: expected 'name value'");
            const std::string& name = o->tokens[0].text;
            const std::uint64_t v = detail::parse_count(*o, o->tokens[1]);
            if(name == "grid")
               options.grid = v;
            else if(name == "tau-grid")
               options.tau_grid = v;
            else if(name == "x-grid")
               options.x_grid = v;
            else if(name == "strategy-grid")
               options.strategy_grid = v;
            else if(name == "refine-factor")
               options.refine_factor = v;
            else if(name == "jitter")
               options.jitter = v;
            else if(name == "horizon-cap")
               options.horizon_cap = v;
            else if(name == "sequence-cap")
               options.sequence_cap = v;
            else if(name == "history-cap")
               options.history_cap = v;
            else if(name == "threads")
               options.threads = v;
            else if(name == "seed")
               options.seed = v;
            else
               throw ParseError(o->number, 1, "unknown option '" + name + "'");
            if(v == 0 && name != "grid" && name != "horizon-cap" && name != "jitter" && name != "seed")
               throw ParseError(o->number, o->tokens[1].column, "option '" + name + "' must be positive");
         }
      } else {
         throw ParseError(l.number, 1, "unknown keyword '" + key + "'");
      }
   }
   const std::size_t last = lines.empty() ? 1 : lines.back().number;
   if(!have_sizes)
      throw ParseError(last, 0, "missing 'sizes'");
   if(!payoff)
      throw ParseError(last, 0, "missing 'payoff' block");
   if(!prior)
      throw ParseError(last, 0, "missing 'prior' block");
   if(!evaluation)
      throw ParseError(last, 0, "missing 'evaluation'");

   GameFile f;
   f.game = GameSpec(K, L, I, J, std::move(*payoff));
   try {
      f.prior = JointBelief(std::move(*prior));
   } catch(const InvariantError& e) {
      throw InvariantError("line " + std::to_string(prior_line) + ": " + e.what());
   }
   f.evaluation = std::move(*evaluation);
   f.options = options;
   return f;
}

/// Canonical text: joint prior, every option written, reals with 17 significant digits.
inline std::string emit_game(const GameFile& f)
{
   using detail::format_real;
   const GameSpec& g = f.game;
   std::ostringstream out;
   out << "sizes " << g.k_size() << ' ' << g.l_size() << ' ' << g.i_size() << ' ' << g.j_size() << '\n';
   out << "payoff\n";
   for(std::size_t k = 0; k < g.k_size(); ++k)
      for(std::size_t l = 0; l < g.l_size(); ++l) {
         out << ' ';
         for(std::size_t i = 0; i < g.i_size(); ++i)
            for(std::size_t j = 0; j < g.j_size(); ++j)
               out << ' ' << format_real(g(k, l, i, j));
         out << '\n';
      }
   out << "end\nprior joint\n";
   for(std::size_t k = 0; k < g.k_size(); ++k) {
      out << ' ';
      for(std::size_t l = 0; l < g.l_size(); ++l)
         out << ' ' << format_real(f.prior(k, l));
      out << '\n';
   }
   out << "end\nevaluation ";
   switch(f.evaluation.kind) {
      case EvaluationSpec::Kind::kUniform: out << "uniform " << f.evaluation.horizon; break;
      case EvaluationSpec::Kind::kDiscounted:
         out << "discounted " << format_real(f.evaluation.lambda) << ' ' << f.evaluation.horizon;
         break;
      case EvaluationSpec::Kind::kWeights:
         out << "weights";
         for(double w : f.evaluation.weights)
            out << ' ' << format_real(w);
         break;
   }
   const GameOptions& o = f.options;
   out << "\noptions\n"
       << "  grid " << o.grid << "\n  tau-grid " << o.tau_grid << "\n  x-grid " << o.x_grid
       << "\n  strategy-grid " << o.strategy_grid << "\n  refine-factor " << o.refine_factor << "\n  jitter "
       << o.jitter << "\n  horizon-cap " << o.horizon_cap << "\n  sequence-cap " << o.sequence_cap
       << "\n  history-cap " << o.history_cap << "\n  threads " << o.threads << "\n  seed " << o.seed
       << "\nend\n";
   return out.str();
}

// ---------------------------------------------------------------------------------------------
// Reports

using Json = nlohmann::json;

struct RunFlags {
   std::optional<std::size_t> grid{}, tau_grid{}, x_grid{}, horizon_cap{}, threads{};
   std::optional<std::uint64_t> seed{};
   std::optional<Vector> x{};  ///< dual point for solve-dual and nonrevealing
   bool cross_check = false;
};

struct Report {
   Json json;
   std::string summary;  ///< human-readable, includes timing
   int exit_code = 0;
};

inline const std::vector<std::string>& commands()
{
   static const std::vector<std::string> c{"solve-primal", "solve-dual",  "recursion-check", "synthesize",
                                           "certify",      "nonrevealing", "independent",    "swap"};
   return c;
}

namespace detail {

inline std::uint64_t fnv1a(std::string_view s)
{
   std::uint64_t h = 14695981039346656037ULL;
   for(unsigned char c : s) {
      h ^= c;
      h *= 1099511628211ULL;
   }
   return h;
}

inline Json bounded(double value, double bound) { return Json{{"value", value}, {"bound", bound}}; }

inline Json matrix_json(const Matrix& m)
{
   Json rows = Json::array();
   for(std::size_t r = 0; r < m.rows(); ++r)
      rows.push_back(m.row_vector(r));
   return rows;
}

/// stages[m][h][type] = distribution over actions; omitted past `max_rows` rows.
inline Json strategy_json(const BehaviorStrategy& s, std::size_t max_rows = 4096)
{
   std::size_t rows = 0;
   for(std::size_t m = 0; m < s.horizon(); ++m)
      rows += s.index().count(m) * s.types();
   Json out{{"types", s.types()}, {"actions", s.actions()}, {"rows", rows}};
   if(rows > max_rows) {
      out["omitted"] = true;
      return out;
   }
   Json stages = Json::array();
   for(std::size_t m = 0; m < s.horizon(); ++m) {
      Json hs = Json::array();
      for(std::size_t h = 0; h < s.index().count(m); ++h) {
         Json ts = Json::array();
         for(std::size_t t = 0; t < s.types(); ++t) {
            auto a = s.at(t, m, h);
            ts.push_back(Vector(a.begin(), a.end()));
         }
         hs.push_back(std::move(ts));
      }
      stages.push_back(std::move(hs));
   }
   out["stages"] = std::move(stages);
   return out;
}

inline Json dual_json(const DualSolution& d)
{
   Json j{{"value", d.value},
          {"bound", d.error_bound()},
          {"error_below", d.error_below},
          {"error_above", d.error_above},
          {"terms",
           {{"tau", d.tau_term}, {"conjugation", d.conj_term}, {"x_grid", d.xgrid_term}, {"children", d.child_term}}},
          {"tau", matrix_json(d.tau)},
          {"candidates", d.candidates}};
   Json splits = Json::array();
   for(const auto& row : d.splits)
      splits.push_back(row);
   j["splits"] = std::move(splits);
   if(!d.weights.empty())
      j["split_weights"] = d.weights;
   return j;
}

inline std::string fmt(double v)
{
   char buf[40];
   std::snprintf(buf, sizeof buf, "%.9g", v);
   return buf;
}

struct Context {
   const GameFile& file;
   const GameSpec& g;
   const JointBelief& pi;
   Evaluation theta;
   double dropped_mass;
   double truncation_bound;
   DualConfig cfg;
   OracleOptions opt;
   const RunFlags& flags;
   double lp_tol;
};

inline Vector dual_point(const Context& c, const Disintegration& d, Json& results)
{
   if(c.flags.x) {
      if(c.flags.x->size() != c.g.k_size())
         throw DomainError("--x must have one entry per type k (" + std::to_string(c.g.k_size()) + ")");
      results["x_source"] = "flag";
      return *c.flags.x;
   }
   ChosenX cx = choose_x(c.g, d.p, d.Q, c.theta, c.cfg.p_resolution(c.g.k_size()), c.opt);
   results["x_source"] = "supergradient at the prior marginal";
   results["x_mesh_term"] = cx.mesh_term;
   return cx.x;
}

inline void command_solve_primal(const Context& c, Json& r, std::ostringstream& s, int& code)
{
   const PrimalSolution sol = primal_value(c.g, c.pi, c.theta, c.opt);
   r["value"] = bounded(sol.value, c.lp_tol + c.truncation_bound);
   r["value_player2"] = bounded(sol.value_player2, c.lp_tol + c.truncation_bound);
   r["strategies"] = {{"player1", strategy_json(sol.s1)}, {"player2", strategy_json(sol.s2)}};
   s << "value " << fmt(sol.value) << " (player 2 program " << fmt(sol.value_player2) << ")\n";
   if(c.flags.cross_check) {
      const double br = best_response_value(c.g, c.pi, c.theta, sol.s2, c.opt).value;
      const bool ok = br - sol.value <= c.lp_tol && br - sol.value >= -c.lp_tol;
      r["cross_check"] = {{"best_response_to_player2", bounded(br, c.lp_tol)},
                          {"exploitability", bounded(br - sol.value, c.lp_tol)},
                          {"agree", ok}};
      s << "best response to player 2: " << fmt(br) << (ok ? " (agrees)\n" : " (DISAGREES)\n");
      if(!ok)
         code = 4;
   }
}

inline void command_solve_dual(const Context& c, Json& r, std::ostringstream& s, int& code)
{
   const Disintegration d = Disintegration::of(c.pi);
   const Vector x = dual_point(c, d, r);
   r["x"] = x;
   const DualState st{x, d.Q, AuxWeight::ones(c.g.k_size()), c.theta};
   const DualSolver solver(c.g, c.cfg);
   const DualSolution sol = c.theta.single_stage() ? solver.solve(st) : solver.dual_recursive(st);
   r["recursive"] = dual_json(sol);
   s << "dual value " << fmt(sol.value) << " in [" << fmt(sol.value - sol.error_below) << ", "
     << fmt(sol.value + sol.error_above) << "]\n";
   if(c.flags.cross_check) {
      const DirectDual dd = dual_value_direct(c.g, x, d.Q, st.zeta, c.theta, c.cfg.p_resolution(c.g.k_size()), c.opt);
      const double combined = sol.error_bound() + dd.error_bound;
      const double tol = 1e-9 * (1.0 + c.g.payoff_bound());
      const bool ok = std::abs(sol.value - dd.value) <= combined + tol;
      r["cross_check"] = {{"direct", bounded(dd.value, dd.error_bound)},
                          {"difference", bounded(sol.value - dd.value, combined)},
                          {"agree", ok}};
      s << "direct conjugate " << fmt(dd.value) << ", difference " << fmt(sol.value - dd.value)
        << " within " << fmt(combined) << (ok ? " (agrees)\n" : " (DISAGREES)\n");
      if(!ok)
         code = 4;
   }
}

inline void command_recursion_check(const Context& c, Json& r, std::ostringstream& s, int& code)
{
   const RecursionCheck rc = primal_recursion_check(c.g, c.pi, c.theta, c.opt);
   r["oracle_value"] = bounded(rc.oracle_value, c.lp_tol);
   r["maxmin"] = bounded(rc.maxmin, rc.bound);
   r["minmax"] = bounded(rc.minmax, rc.bound);
   r["grid_points"] = rc.nodes;
   r["holds"] = rc.holds;
   s << "oracle " << fmt(rc.oracle_value) << ", grid sup-inf " << fmt(rc.maxmin) << ", inf-sup "
     << fmt(rc.minmax) << ", bound " << fmt(rc.bound) << (rc.holds ? " (holds)\n" : " (FAILS)\n");
   if(!rc.holds)
      code = 4;
}

inline Json tree_json(const PolicyTree& t)
{
   return Json{{"x", t.chosen.x},
               {"p", t.p},
               {"mesh_term", t.chosen.mesh_term},
               {"root_epsilon", t.root->epsilon},
               {"epsilon_total", t.epsilon_total},
               {"guarantee_bound", t.guarantee_bound()},
               {"root_tau", matrix_json(t.root->tau)},
               {"nodes", t.nodes},
               {"markov_audit", {{"collisions", t.audit.collisions}, {"mismatches", t.audit.mismatches}}}};
}

inline void command_synthesize(const Context& c, Json& r, std::ostringstream& s, int& code, bool certify_too)
{
   const PolicyTree t = synthesize(c.g, c.pi, c.theta, c.cfg);
   const BehaviorStrategy b = as_behavior_strategy(t, c.opt.history_cap);
   r["tree"] = tree_json(t);
   r["q_consistency_gap"] = bounded(q_consistency_gap(t, b), 1e-10);
   r["strategy"] = strategy_json(b);
   s << "synthesized " << t.nodes << " nodes, epsilon_total " << fmt(t.epsilon_total) << " (mesh "
     << fmt(t.chosen.mesh_term) << ", recursion " << fmt(t.root->epsilon) << "), a posteriori "
     << fmt(t.guarantee_bound()) << '\n';
   if(t.audit.mismatches > 0)
      code = 4;
   if(!certify_too)
      return;
   const Certification cert = certify(c.g, c.pi, c.theta, t, c.opt);
   r["certificate"] = {{"exploitability", bounded(cert.exploitability, cert.tolerance)},
                       {"best_response", bounded(cert.best_response, cert.tolerance)},
                       {"value", bounded(cert.value, cert.tolerance + c.truncation_bound)},
                       {"epsilon_total", cert.epsilon_total},
                       {"guarantee_bound", cert.guarantee_bound},
                       {"within", cert.within}};
   s << "exploitability " << fmt(cert.exploitability) << " <= " << fmt(cert.epsilon_total)
     << (cert.within ? " (certified)\n" : " (NOT CERTIFIED)\n");
   if(!cert.within)
      code = 4;
}

inline void command_nonrevealing(const Context& c, Json& r, std::ostringstream& s, int& code)
{
   const Disintegration d = Disintegration::of(c.pi);
   const Vector x = dual_point(c, d, r);
   r["x"] = x;
   const NonRevealing nr = nonrevealing_bound(c.g, x, d.Q, c.theta, c.cfg);
   r["rhs"] = Json{{"value", nr.rhs}, {"bound", nr.rhs_below + nr.rhs_above},
                   {"error_below", nr.rhs_below}, {"error_above", nr.rhs_above}};
   r["tau_bar"] = nr.tau_bar;
   r["recursive"] = dual_json(nr.recursive);
   r["slack"] = bounded(nr.slack, nr.recursive.error_bound() + nr.rhs_below + nr.rhs_above);
   r["holds"] = nr.holds;
   r["equality"] = nr.equality;
   s << "recursive " << fmt(nr.recursive.value) << ", non-revealing bound " << fmt(nr.rhs) << ", slack "
     << fmt(nr.slack) << (nr.holds ? " (inequality holds" : " (INEQUALITY FAILS")
     << (nr.equality ? ", equal within certificates)\n" : ")\n");
   if(!nr.holds)
      code = 4;
}

inline void command_independent(const Context& c, Json& r, std::ostringstream& s, int& code)
{
   const Disintegration d = Disintegration::of(c.pi);
   const Vector x = dual_point(c, d, r);
   r["x"] = x;
   if(c.theta.single_stage())
      throw DomainError("independent: the evaluation needs more than one stage");
   const DualSolver solver(c.g, c.cfg);
   const DualSolution ind = solver.independent_recursive(x, d.Q, c.theta);
   const DualSolution dep = solver.dual_recursive(DualState{x, d.Q, AuxWeight::ones(c.g.k_size()), c.theta});
   const double combined = ind.error_bound() + dep.error_bound();
   const bool ok = std::abs(ind.value - dep.value) <= combined + 1e-9 * (1.0 + c.g.payoff_bound());
   r["independent"] = dual_json(ind);
   r["dependent"] = dual_json(dep);
   r["difference"] = bounded(ind.value - dep.value, combined);
   r["agree"] = ok;
   s << "independent formula " << fmt(ind.value) << ", general recursion " << fmt(dep.value)
     << (ok ? " (agree)\n" : " (DISAGREE)\n");
   if(!ok)
      code = 4;
}

inline void command_swap(const Context& c, Json& r, std::ostringstream& s, int& code)
{
   auto [g2, pi2] = swap_roles(c.g, c.pi);
   GameFile f2{g2, pi2, c.file.evaluation, c.file.options};
   r["swapped_game"] = emit_game(f2);
   const double v = primal_value_only(c.g, c.pi, c.theta, AuxWeight::ones(c.g.k_size()), c.opt);
   const double v2 = primal_value_only(g2, pi2, c.theta, AuxWeight::ones(g2.k_size()), c.opt);
   const bool neg = std::abs(v + v2) <= 2.0 * c.lp_tol;
   r["value"] = bounded(v, c.lp_tol);
   r["swapped_value"] = bounded(v2, c.lp_tol);
   r["negation"] = bounded(v + v2, 2.0 * c.lp_tol);
   s << "value " << fmt(v) << ", swapped " << fmt(v2) << (neg ? " (negated)\n" : " (NOT NEGATED)\n");
   // player 1's strategy is player 2's in the swapped game
   const PolicyTree t = synthesize(g2, pi2, c.theta, c.cfg);
   const Certification cert = certify(g2, pi2, c.theta, t, c.opt);
   r["player1"] = {{"tree", tree_json(t)},
                   {"exploitability", bounded(cert.exploitability, cert.tolerance)},
                   {"epsilon_total", cert.epsilon_total},
                   {"within", cert.within},
                   {"strategy", strategy_json(as_behavior_strategy(t, c.opt.history_cap))}};
   s << "player 1 strategy exploitability " << fmt(cert.exploitability) << " <= " << fmt(cert.epsilon_total)
     << (cert.within ? " (certified)\n" : " (NOT CERTIFIED)\n");
   if(!neg || !cert.within)
      code = 4;
}

}  // namespace detail

/// Applies the flags to the file's options, then dispatches. Errors propagate; see exit_code_for.
inline Report run(const std::string& command, const GameFile& input, const RunFlags& flags = {})
{
   using namespace detail;
   const auto& cmds = commands();
   if(std::find(cmds.begin(), cmds.end(), command) == cmds.end())
      throw DomainError("unknown command '" + command + "'");
   GameFile file = input;
   GameOptions& o = file.options;
   if(flags.grid)
      o.grid = *flags.grid;
   if(flags.tau_grid)
      o.tau_grid = *flags.tau_grid;
   if(flags.x_grid)
      o.x_grid = *flags.x_grid;
   if(flags.horizon_cap)
      o.horizon_cap = *flags.horizon_cap;
   if(flags.threads)
      o.threads = *flags.threads;
   if(flags.seed)
      o.seed = *flags.seed;

   const Truncation tr = file.evaluation.resolve(o.horizon_cap);
   const GameSpec& g = file.game;
   Context c{file, g, file.prior, tr.normalized, tr.dropped_mass, tr.error_bound(g),
             o.dual(), o.oracle(), flags, 1e-7 * (1.0 + g.payoff_bound())};

   std::string canonical = emit_game(file) + "command " + command + "\n";
   if(flags.x) {
      canonical += "x";
      for(double v : *flags.x)
         canonical += ' ' + format_real(v);
      canonical += '\n';
   }
   if(flags.cross_check)
      canonical += "cross-check\n";
   char digest[20];
   std::snprintf(digest, sizeof digest, "%016llx", static_cast<unsigned long long>(fnv1a(canonical)));

   Report rep;
   Json results = Json::object();
   std::ostringstream s;
   s << command << ": K=" << g.k_size() << " L=" << g.l_size() << " I=" << g.i_size() << " J=" << g.j_size()
     << ", horizon " << c.theta.horizon() << '\n';
   const auto start = std::chrono::steady_clock::now();
   if(command == "solve-primal")
      command_solve_primal(c, results, s, rep.exit_code);
   else if(command == "solve-dual")
      command_solve_dual(c, results, s, rep.exit_code);
   else if(command == "recursion-check")
      command_recursion_check(c, results, s, rep.exit_code);
   else if(command == "synthesize")
      command_synthesize(c, results, s, rep.exit_code, false);
   else if(command == "certify")
      command_synthesize(c, results, s, rep.exit_code, true);
   else if(command == "nonrevealing")
      command_nonrevealing(c, results, s, rep.exit_code);
   else if(command == "independent")
      command_independent(c, results, s, rep.exit_code);
   else
      command_swap(c, results, s, rep.exit_code);
   const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
   s << "time " << fmt(secs) << " s\n";

   rep.json = Json{{"command", command},
                   {"digest", digest},
                   {"game", {{"k", g.k_size()}, {"l", g.l_size()}, {"i", g.i_size()}, {"j", g.j_size()}}},
                   {"evaluation", {{"weights", c.theta.weights()}, {"dropped_mass", tr.dropped_mass},
                                   {"truncation_bound", c.truncation_bound}}},
                   {"options",
                    {{"grid", c.cfg.p_resolution(g.k_size())}, {"tau_grid", o.tau_grid}, {"x_grid", o.x_grid},
                     {"strategy_grid", o.strategy_grid}, {"refine_factor", o.refine_factor}, {"jitter", o.jitter},
                     {"horizon_cap", o.horizon_cap}, {"seed", o.seed}}},
                   {"results", std::move(results)},
                   {"status", rep.exit_code == 0 ? "ok" : "failed"}};
   rep.summary = s.str();
   return rep;
}

/// 2: bad input or command, 3: a resource cap was hit, 4: an invariant or a check failed.
inline int exit_code_for(const std::exception& e)
{
   if(dynamic_cast<const ResourceError*>(&e))
      return 3;
   if(dynamic_cast<const ParseError*>(&e) || dynamic_cast<const DomainError*>(&e))
      return 2;
   return 4;
}

inline std::string remediation_hint(const std::exception& e)
{
   if(dynamic_cast<const ResourceError*>(&e))
      return "reduce the horizon (--horizon-cap) or the grids (--grid, --tau-grid, --x-grid), "
             "or raise sequence-cap / history-cap in the options block";
   return {};
}

}  // namespace dualgame

#endif  // DUALGAME_CLI_REPORTS_HPP
