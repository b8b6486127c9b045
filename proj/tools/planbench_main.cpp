// planbench CLI: parse | eval-plan | simulate | reward | difficulty
//
// Option precedence is defaults < config file < explicit flags, so flags are
// applied onto the config only when the user actually passed them.

#include <CLI11.hpp>
#include <planbench/harness.hpp>

namespace {

using planbench::RunConfig;

struct CliValues {
  std::string config_path;
  std::string input, second, out, action_set, matcher, judge_stub, scene_dir, predictor;
  std::vector<std::string> kinds;
  uint64_t seed = 0;
  int workers = 1;
  bool lenient = false;
  double w_rule = 0.5;
};

void add_common(CLI::App* cmd, CliValues& v) {
  cmd->add_option("-i,--input", v.input, "input records (JSONL)")->required();
  cmd->add_option("-c,--config", v.config_path, "JSON config file");
  cmd->add_option("-o,--out", v.out, "report path (default: stdout)");
  cmd->add_option("-s,--seed", v.seed, "base seed");
  cmd->add_option("-w,--workers", v.workers, "worker threads");
  cmd->add_option("--action-set", v.action_set, "action vocabulary file");
}

// flags beat the config file only when actually given
void overlay(const CLI::App* cmd, const CliValues& v, RunConfig& cfg) {
  cfg.input = v.input;
  auto passed = [cmd](const char* name) {
    const CLI::Option* opt = cmd->get_option_no_throw(name);
    return opt && opt->count() > 0;
  };
  if (passed("--out")) cfg.out = v.out;
  if (passed("--seed")) cfg.seed = v.seed;
  if (passed("--workers")) cfg.workers = v.workers;
  if (passed("--action-set")) cfg.action_set_path = v.action_set;
  if (passed("--gt") || passed("--pred")) cfg.second = v.second;
  if (passed("--matcher")) cfg.matcher = v.matcher;
  if (passed("--lenient")) cfg.strict_parse = !v.lenient;
  if (passed("--judge-stub")) cfg.judge_stub = v.judge_stub;
  if (passed("--kinds")) cfg.kinds = v.kinds;
  if (passed("--w-rule")) cfg.w_rule = v.w_rule;
  if (passed("--scene-dir")) cfg.scene_dir = v.scene_dir;
  if (passed("--predictor")) cfg.predictor = v.predictor;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"embodied task-planning evaluation toolkit"};
  app.require_subcommand(1);

  CliValues v;
  CLI::App* parse = app.add_subcommand("parse", "strict-parse structured outputs");
  CLI::App* eval = app.add_subcommand("eval-plan", "match-matrix plan metrics");
  CLI::App* sim = app.add_subcommand("simulate", "execute plans in the simulator");
  CLI::App* reward = app.add_subcommand("reward", "per-sample reward scores");
  CLI::App* diff = app.add_subcommand("difficulty", "masking-curve difficulty profiles");
  for (CLI::App* cmd : {parse, eval, sim, reward, diff}) add_common(cmd, v);

  eval->add_option("--gt", v.second, "ground-truth records (JSONL); omit for paired input");
  eval->add_option("--matcher", v.matcher, "rule | judge");
  eval->add_flag("--lenient", v.lenient, "salvage partially tagged predictions");
  eval->add_option("--judge-stub", v.judge_stub, "stub judge spec, e.g. stub:fixed=...");

  sim->add_option("--pred", v.second, "predicted plans (JSONL); omit to run gold plans");
  sim->add_option("--scene-dir", v.scene_dir, "scene directory (default: <tasks>/../scenes)");

  reward->add_option("--kinds", v.kinds, "reward kinds: format grm perception spatial instruction")
      ->delimiter(',');
  reward->add_option("--judge-stub", v.judge_stub, "stub judge spec");
  reward->add_option("--w-rule", v.w_rule, "rule weight in the combined reward");

  diff->add_option("--predictor", v.predictor,
                   "stub:always_correct | stub:always_wrong | stub:threshold=<c> | endpoint");
  diff->add_option("--judge-stub", v.judge_stub, "stub judge spec (backs 'endpoint')");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    // fold CLI11's assorted usage codes into the config-error exit
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  CLI::App* cmd = app.get_subcommands().front();

  try {
    RunConfig cfg;
    if (cmd->count("--config")) planbench::apply_config_file(cfg, v.config_path);
    overlay(cmd, v, cfg);

    planbench::Report rep;
    if (cmd == parse) rep = planbench::run_parse(cfg);
    else if (cmd == eval) rep = planbench::run_eval_plan(cfg);
    else if (cmd == sim) rep = planbench::run_simulate(cfg);
    else if (cmd == reward) rep = planbench::run_reward(cfg);
    else rep = planbench::run_difficulty(cfg);

    planbench::write_report(rep, cfg.out);
    return planbench::report_exit_code(rep);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "planbench %s: %s\n", cmd->get_name().c_str(), e.what());
    return 2;
  }
}
