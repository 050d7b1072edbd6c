#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "trajforge/fork.hpp"
#include "trajforge/pipeline.hpp"
#include "trajforge/rl.hpp"
#include "trajforge/samples.hpp"
#include "trajforge/sim.hpp"
#include "trajforge/trajectory.hpp"

using nlohmann::json;
namespace tf = trajforge;

namespace {

void write_output(const std::string& text, const std::string& out_file) {
  if (out_file.empty()) {
    std::cout << text << "\n";
    return;
  }
  std::ofstream f(out_file, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot write " + out_file);
  f << text << "\n";
}

std::vector<double> parse_csv(const std::string& csv, const char* what) {
  std::vector<double> out;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      out.push_back(std::stod(item));
    } catch (const std::exception&) {
      throw std::runtime_error(std::string(what) + ": bad number \"" + item +
                               "\"");
    }
  }
  if (out.empty())
    throw std::runtime_error(std::string(what) + ": empty list");
  return out;
}

json advantage_json(const tf::AdvantageResult& r) {
  return json{{"values", r.values}, {"degenerate", r.degenerate}};
}

void add_match_options(CLI::App* cmd, tf::DetectConfig& cfg) {
  cmd->add_option("--theta", cfg.match.theta,
                  "SSIM acceptance threshold (default 0.95)");
  cmd->add_option("--prefilter", cfg.match.hash_prefilter_threshold,
                  "mean-hash similarity below which SSIM is skipped "
                  "(default 0.80)");
  cmd->add_option("--hash-size", cfg.match.hash_size,
                  "mean-hash grid side length (default 8)");
  cmd->add_option("--ssim-window", cfg.match.ssim_window,
                  "SSIM window side length (default 8)");
  cmd->add_option("--crop", cfg.preprocess.statusbar_crop_px,
                  "status-bar rows cropped before matching (default 48)");
  cmd->add_option("--thumb-width", cfg.preprocess.thumb_width,
                  "matching thumbnail width (default 64)");
  cmd->add_option("--thumb-height", cfg.preprocess.thumb_height,
                  "matching thumbnail height (default 128)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "trajforge: curate GUI-agent trajectory groups into corrective "
      "training data (simulate, filter, fork-point detect, forge, emit)"};
  app.require_subcommand(1);

  std::string out_file;
  app.add_option("--out", out_file, "write JSON output here instead of stdout")
      ->capture_default_str();
  // Let `--out` (and any other app-level option) appear after the subcommand.
  auto with_fallthrough = [&](CLI::App* cmd) {
    cmd->fallthrough();
    return cmd;
  };

  // --- sim run ------------------------------------------------------------
  auto* sim = with_fallthrough(app.add_subcommand("sim", "deterministic GUI simulator"));
  auto* sim_run = with_fallthrough(sim->add_subcommand("run", "roll out one scripted episode"));
  std::string sim_template = "maze";
  uint32_t sim_seed = 0;
  bool sim_fault = false;
  uint32_t sim_fault_seed = 0;
  std::string sim_dir;
  std::string sim_id = "rollout";
  sim_run->add_option("--template", sim_template,
                      "task template: maze or toggle")
      ->check(CLI::IsMember(tf::sim_templates()));
  sim_run->add_option("--seed", sim_seed, "task perturbation seed");
  sim_run->add_flag("--fault", sim_fault,
                    "inject one wrong action at a seeded random step");
  sim_run->add_option("--fault-seed", sim_fault_seed,
                      "seed for the fault draw (default 0)");
  sim_run->add_option("--dir", sim_dir,
                      "write the trajectory archive to this directory");
  sim_run->add_option("--id", sim_id, "trajectory id for the archive");

  // --- filter ---------------------------------------------------------------
  auto* filter = with_fallthrough(app.add_subcommand(
      "filter", "rejection-sample a rollout group: keep only verifier passes"));
  std::string filter_group;
  filter->add_option("--group", filter_group,
                     "directory of trajectory archives (one subdir each)")
      ->required();

  // --- detect ---------------------------------------------------------------
  auto* detect = with_fallthrough(app.add_subcommand(
      "detect", "find fork points between a successful and a failed rollout"));
  std::string detect_success, detect_failed;
  tf::DetectConfig detect_cfg;
  detect->add_option("--success", detect_success,
                     "archive dir of the successful (teacher) trajectory")
      ->required();
  detect->add_option("--failed", detect_failed,
                     "archive dir of the failed trajectory")
      ->required();
  add_match_options(detect, detect_cfg);

  // --- forge ----------------------------------------------------------------
  auto* forge = with_fallthrough(app.add_subcommand(
      "forge", "build corrective samples for a whole rollout group"));
  std::string forge_group;
  int forge_history = 30;
  tf::DetectConfig forge_cfg;
  std::string forge_root;
  forge->add_option("--group", forge_group,
                    "directory of trajectory archives (one subdir each)")
      ->required();
  forge->add_option("--history", forge_history,
                    "prompt history window size (default 30)");
  forge->add_option("--archive-root", forge_root,
                    "record this archive root in a dataset header line");
  add_match_options(forge, forge_cfg);

  // --- pipeline ---------------------------------------------------------------
  auto* pipeline = with_fallthrough(
      app.add_subcommand("pipeline", "run the full data-curation pipeline"));
  std::string pipe_config;
  int pipe_jobs = 0;
  std::string pipe_out_dir;
  pipeline->add_option("--config", pipe_config, "pipeline config JSON file")
      ->required();
  pipeline->add_option("--jobs", pipe_jobs,
                       "parallel task workers (overrides config)");
  pipeline->add_option("--out-dir", pipe_out_dir,
                       "output directory (overrides config)");

  // --- advantage ---------------------------------------------------------------
  auto* advantage = with_fallthrough(app.add_subcommand(
      "advantage", "reference advantage / objective calculators"));
  std::string adv_grpo, adv_rewards, adv_values, adv_ratios, adv_advantages;
  double adv_gamma = 1.0, adv_lam = 1.0;
  tf::ClipConfig clip_cfg;
  bool adv_gae = false, adv_surrogate = false;
  advantage->add_option("--grpo", adv_grpo,
                        "group rewards (csv) -> normalized advantages");
  advantage->add_flag("--gae", adv_gae,
                      "temporal-difference advantages from --rewards/--values");
  advantage->add_flag("--surrogate", adv_surrogate,
                      "clipped surrogate mean from --ratios/--advantages");
  advantage->add_option("--rewards", adv_rewards, "per-step rewards (csv)");
  advantage->add_option("--values", adv_values,
                        "state values incl. terminal bootstrap (csv)");
  advantage->add_option("--gamma", adv_gamma, "discount (default 1.0)");
  advantage->add_option("--lam", adv_lam, "GAE lambda (default 1.0)");
  advantage->add_option("--ratios", adv_ratios,
                        "importance sampling ratios (csv)");
  advantage->add_option("--advantages", adv_advantages,
                        "per-position advantages (csv)");
  advantage->add_option("--eps-low", clip_cfg.eps_low,
                        "lower clip width (default 0.2)");
  advantage->add_option("--eps-high", clip_cfg.eps_high,
                        "upper clip width (default 0.28)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (sim_run->parsed()) {
      tf::TaskInstance task = tf::perturb_task(sim_template, sim_seed);
      tf::ScriptedPolicy policy;
      if (sim_fault) {
        policy = tf::inject_fault(task, sim_fault_seed);
      } else {
        policy.base = tf::optimal_policy(task);
      }
      tf::Trajectory traj = tf::scripted_rollout(task, policy, sim_id);
      if (!sim_dir.empty()) tf::save_trajectory(traj, sim_dir);
      json j{{"task_id", traj.task_id},
             {"trajectory_id", traj.trajectory_id},
             {"verdict", std::string(tf::to_string(traj.verdict))},
             {"steps", traj.steps.size()}};
      if (policy.fault_step) j["fault_step"] = *policy.fault_step;
      if (!sim_dir.empty()) j["archive"] = sim_dir;
      write_output(j.dump(2), out_file);
    } else if (filter->parsed()) {
      tf::GroupRollout group = tf::load_group(filter_group);
      auto kept = tf::reject_filter(group.trajectories);
      json kept_ids = json::array(), dropped_ids = json::array();
      for (const tf::Trajectory& t : group.trajectories) {
        (t.verdict == tf::Verdict::success ? kept_ids : dropped_ids)
            .push_back(t.trajectory_id);
      }
      json j{{"task_id", group.task_id},
             {"kept", std::move(kept_ids)},
             {"dropped", std::move(dropped_ids)},
             {"kept_count", kept.size()}};
      write_output(j.dump(2), out_file);
    } else if (detect->parsed()) {
      tf::Trajectory succ = tf::load_trajectory(detect_success);
      tf::Trajectory fail = tf::load_trajectory(detect_failed);
      tf::MatchSet ms = tf::detect_fork_points(succ, fail, detect_cfg);
      write_output(tf::match_set_json(ms), out_file);
    } else if (forge->parsed()) {
      tf::GroupRollout group = tf::load_group(forge_group);
      auto pairing = tf::pair_group(group, forge_cfg);
      auto samples = tf::build_samples(pairing, group, forge_history);
      std::optional<std::string> root;
      if (!forge_root.empty()) root = forge_root;
      if (!out_file.empty()) {
        size_t n = tf::emit_dataset(samples, out_file, root);
        std::cout << json{{"samples", n}, {"file", out_file}}.dump(2) << "\n";
      } else {
        if (root)
          std::cout << json{{"format_version", 1}, {"archive_root", *root}}
                           .dump()
                    << "\n";
        for (const tf::CorrectiveSample& s : samples)
          std::cout << tf::sample_json(s).dump() << "\n";
      }
    } else if (pipeline->parsed()) {
      tf::PipelineConfig cfg = tf::load_pipeline_config(pipe_config);
      if (pipe_jobs > 0) cfg.jobs = pipe_jobs;
      if (!pipe_out_dir.empty()) cfg.out_dir = pipe_out_dir;
      tf::PipelineReport report = tf::run_pipeline(cfg);
      write_output(tf::report_json(report), out_file);
    } else if (advantage->parsed()) {
      int modes = (!adv_grpo.empty() ? 1 : 0) + (adv_gae ? 1 : 0) +
                  (adv_surrogate ? 1 : 0);
      if (modes != 1)
        throw std::runtime_error(
            "advantage: pick exactly one of --grpo, --gae, --surrogate");
      json j;
      if (!adv_grpo.empty()) {
        j = advantage_json(
            tf::grpo_advantages(parse_csv(adv_grpo, "--grpo")));
      } else if (adv_gae) {
        j = advantage_json(tf::gae(parse_csv(adv_rewards, "--rewards"),
                                   parse_csv(adv_values, "--values"),
                                   adv_gamma, adv_lam));
      } else {
        double v = tf::clipped_surrogate(
            parse_csv(adv_ratios, "--ratios"),
            parse_csv(adv_advantages, "--advantages"), clip_cfg);
        j = json{{"objective", v}};
      }
      write_output(j.dump(2), out_file);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
