#include "dhtm/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <set>
#include <sstream>
#include <thread>

#include "dhtm/check.hpp"
#include "dhtm/svg.hpp"

namespace dhtm {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string num(double v) {
    if (std::isnan(v)) return "";
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.10g", v);
    return buf;
}

EpisodeSummary summarize(int episode, const EpisodeRecord& record, int offsets) {
    EpisodeSummary s;
    s.episode = episode;
    s.total_reward = record.total_reward;
    s.steps = static_cast<int>(record.steps.size());
    for (int l = 1; l <= offsets; ++l) s.mean_surprise.push_back(record.mean_surprise(l));
    s.segment_count = record.steps.empty() ? 0 : record.steps.back().segment_count;
    return s;
}

void export_episode_frames(const ExperimentConfig& config, const TrialResult& trial,
                           const std::string& dir) {
    if (trial.episodes.empty()) return;
    fs::create_directories(dir);
    PinballConfig env_config = config.env;
    env_config.seed = derive_seed(trial.seed, "env");
    PinballEnv env(env_config);
    const EpisodeRecord& record = trial.episodes.front();
    auto dump = [&dir](const std::vector<float>& frame, int step, int w, int h) {
        std::ostringstream name;
        name << dir << "/episode0_step" << step << ".pgm";
        std::ofstream os(name.str(), std::ios::binary);
        os << "P5\n" << w << ' ' << h << "\n255\n";
        for (float v : frame) os.put(static_cast<char>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255)));
    };
    auto res = env.reset();
    dump(res.frame, 0, env_config.res_x, env_config.res_y);
    int step = 1;
    for (const auto& row : record.steps) {
        if (row.action < 0 || res.terminal) break;
        res = env.step(row.action);
        dump(res.frame, step++, env_config.res_x, env_config.res_y);
    }
}

std::vector<PlotSeries> seed_traces_with_mean(
    const std::vector<TrialResult>& trials,
    const std::function<double(const EpisodeSummary&)>& metric) {
    static const char* kSeedColors[] = {"#9ecae1", "#a1d99b", "#fdae6b", "#bcbddc", "#fc9272"};
    std::vector<PlotSeries> series;
    const std::size_t episodes = trials.empty() ? 0 : trials[0].summaries.size();
    for (std::size_t t = 0; t < trials.size(); ++t) {
        PlotSeries s;
        s.label = "seed " + std::to_string(trials[t].seed);
        s.color = kSeedColors[t % 5];
        for (const auto& sum : trials[t].summaries) {
            s.x.push_back(sum.episode);
            s.y.push_back(metric(sum));
        }
        series.push_back(std::move(s));
    }
    PlotSeries mean;
    mean.label = "mean";
    mean.color = "#d62728";
    mean.stroke_width = 2.0;
    for (std::size_t e = 0; e < episodes; ++e) {
        double sum = 0.0;
        int n = 0;
        for (const auto& trial : trials) {
            const double v = metric(trial.summaries[e]);
            if (!std::isnan(v)) {
                sum += v;
                ++n;
            }
        }
        mean.x.push_back(trials[0].summaries[e].episode);
        mean.y.push_back(n ? sum / n : std::numeric_limits<double>::quiet_NaN());
    }
    series.push_back(std::move(mean));
    return series;
}

void write_plots(const std::vector<TrialResult>& trials, const std::string& out_dir) {
    {
        std::ofstream os(out_dir + "/return_vs_episode.svg");
        os << render_line_chart("Episode return", "episode", "return",
                                seed_traces_with_mean(
                                    trials, [](const EpisodeSummary& s) { return s.total_reward; }));
    }
    {
        std::ofstream os(out_dir + "/surprise_vs_episode.svg");
        os << render_line_chart(
            "1-step surprise", "episode", "surprise",
            seed_traces_with_mean(trials, [](const EpisodeSummary& s) {
                return s.mean_surprise.empty() ? std::numeric_limits<double>::quiet_NaN()
                                               : s.mean_surprise[0];
            }));
    }
}

TrainResult run_trials(const ExperimentConfig& config) {
    TrainResult result;
    result.trials.resize(config.seeds.size());
    std::vector<std::exception_ptr> errors(config.seeds.size());
    std::vector<std::thread> workers;
    for (std::size_t i = 0; i < config.seeds.size(); ++i) {
        workers.emplace_back([&, i]() {
            try {
                TrialRunner runner(config, config.seeds[i]);
                TrialResult trial;
                trial.seed = config.seeds[i];
                trial.episodes = runner.run_episodes(0, config.episodes);
                for (int e = 0; e < config.episodes; ++e)
                    trial.summaries.push_back(
                        summarize(e, trial.episodes[e], config.agent.surprise_offsets));
                trial.final_checkpoint = runner.checkpoint();
                result.trials[i] = std::move(trial);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        });
    }
    for (auto& w : workers) w.join();
    for (auto& err : errors)
        if (err) std::rethrow_exception(err);
    return result;
}

}  // namespace

TrialRunner::TrialRunner(const ExperimentConfig& config, std::uint64_t seed)
    : config_(config), seed_(seed), trial_(build_trial(config, seed)) {}

std::vector<EpisodeRecord> TrialRunner::run_episodes(int first_episode, int count) {
    std::vector<EpisodeRecord> records;
    records.reserve(count);
    for (int e = first_episode; e < first_episode + count; ++e) {
        if (config_.switch_episode >= 0 && e >= config_.switch_episode && !switched_) {
            trial_.env.set_fields(config_.switch_fields);
            switched_ = true;
        }
        records.push_back(trial_.agent.run_episode(trial_.env));
    }
    return records;
}

TrialCheckpoint TrialRunner::checkpoint() const {
    TrialCheckpoint c;
    const Agent& agent = trial_.agent;
    c.encoder_neurons = agent.encoder().config().num_neurons;
    c.encoder_input_dim = agent.encoder().config().input_dim;
    c.encoder = agent.encoder().snapshot();
    c.topology = agent.memory().topology();
    c.memory = agent.memory().snapshot();
    c.sr_rows = agent.sr().rows();
    c.sr_cols = agent.sr().cols();
    c.sr_gamma = agent.sr().config().gamma;
    c.sr_horizon = agent.sr().config().horizon;
    c.sr_data.assign(agent.sr().data().begin(), agent.sr().data().end());
    c.reward_r.assign(agent.reward_model().r().begin(), agent.reward_model().r().end());
    c.policy_rng = agent.policy_rng();
    c.env_rng = trial_.env.rng();
    c.env_state = trial_.env.state();
    c.env_inside.assign(trial_.env.inside_flags().begin(), trial_.env.inside_flags().end());
    return c;
}

void TrialRunner::restore(const TrialCheckpoint& c) {
    Agent& agent = trial_.agent;
    check_arg(c.encoder_neurons == agent.encoder().config().num_neurons &&
                  c.encoder_input_dim == agent.encoder().config().input_dim,
              "restore: encoder shape mismatch");
    check_arg(c.topology.n_vars == agent.memory().topology().n_vars &&
                  c.topology.n_obs_states == agent.memory().topology().n_obs_states &&
                  c.topology.cells_per_column == agent.memory().topology().cells_per_column &&
                  c.topology.n_action_states == agent.memory().topology().n_action_states,
              "restore: topology mismatch");
    agent.encoder().restore(c.encoder);
    agent.memory().restore(c.memory);
    agent.sr().restore(c.sr_data);
    agent.reward_model().restore(c.reward_r);
    agent.policy_rng() = c.policy_rng;
    trial_.env.restore(c.env_state, c.env_inside, c.env_rng);
}

void write_steps_csv(std::ostream& os, const std::vector<TrialResult>& trials, int offsets) {
    os << "seed,episode,step,action,reward";
    for (int l = 1; l <= offsets; ++l) os << ",surprise_" << l;
    os << ",segment_count\n";
    for (const auto& trial : trials) {
        for (std::size_t e = 0; e < trial.episodes.size(); ++e) {
            for (const auto& row : trial.episodes[e].steps) {
                os << trial.seed << ',' << e << ',' << row.step << ',' << row.action << ','
                   << num(row.reward);
                for (int l = 0; l < offsets; ++l) {
                    const double v =
                        l < static_cast<int>(row.surprise.size())
                            ? row.surprise[l]
                            : std::numeric_limits<double>::quiet_NaN();
                    os << ',' << num(v);
                }
                os << ',' << row.segment_count << '\n';
            }
        }
    }
}

void write_episodes_csv(std::ostream& os, const std::vector<TrialResult>& trials) {
    os << "episode";
    for (const auto& t : trials) os << ",return_s" << t.seed;
    os << ",return_mean";
    for (const auto& t : trials) os << ",surprise1_s" << t.seed;
    os << ",surprise1_mean";
    for (const auto& t : trials) os << ",steps_s" << t.seed;
    for (const auto& t : trials) os << ",segments_s" << t.seed;
    os << '\n';
    const std::size_t episodes = trials.empty() ? 0 : trials[0].summaries.size();
    for (std::size_t e = 0; e < episodes; ++e) {
        os << trials[0].summaries[e].episode;
        double rsum = 0.0;
        for (const auto& t : trials) {
            os << ',' << num(t.summaries[e].total_reward);
            rsum += t.summaries[e].total_reward;
        }
        os << ',' << num(rsum / trials.size());
        double ssum = 0.0;
        int scount = 0;
        for (const auto& t : trials) {
            const double v = t.summaries[e].mean_surprise.empty()
                                 ? std::numeric_limits<double>::quiet_NaN()
                                 : t.summaries[e].mean_surprise[0];
            os << ',' << num(v);
            if (!std::isnan(v)) {
                ssum += v;
                ++scount;
            }
        }
        os << ',' << num(scount ? ssum / scount : std::numeric_limits<double>::quiet_NaN());
        for (const auto& t : trials) os << ',' << t.summaries[e].steps;
        for (const auto& t : trials) os << ',' << t.summaries[e].segment_count;
        os << '\n';
    }
}

void write_compare_csv(std::ostream& os,
                       const std::vector<std::pair<std::string, TrainResult>>& variants) {
    os << "variant,seed,episode,return,steps,surprise_1,segment_count\n";
    for (const auto& [name, result] : variants) {
        for (const auto& trial : result.trials) {
            for (const auto& s : trial.summaries) {
                const double surprise =
                    s.mean_surprise.empty() ? std::numeric_limits<double>::quiet_NaN()
                                            : s.mean_surprise[0];
                os << name << ',' << trial.seed << ',' << s.episode << ',' << num(s.total_reward)
                   << ',' << s.steps << ',' << num(surprise) << ',' << s.segment_count << '\n';
            }
        }
    }
}

TrainResult run_train(const ExperimentConfig& config) {
    fs::create_directories(config.out_dir);
    std::ofstream steps_os(config.out_dir + "/steps.csv");
    if (!steps_os) throw ConfigError("output path is not writable: " + config.out_dir);

    const auto started = std::chrono::steady_clock::now();
    TrainResult result = run_trials(config);
    result.out_dir = config.out_dir;
    const double elapsed =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();

    write_steps_csv(steps_os, result.trials, config.agent.surprise_offsets);
    steps_os.close();
    {
        std::ofstream os(config.out_dir + "/episodes.csv");
        write_episodes_csv(os, result.trials);
    }
    for (const auto& trial : result.trials) {
        save_checkpoint_file(
            config.out_dir + "/checkpoint_seed" + std::to_string(trial.seed) + ".dhtm",
            trial.final_checkpoint);
    }
    {
        // Timing lives here rather than in the CSVs, which stay byte-stable
        // across reruns of the same seed.
        json run_info{{"wall_clock_seconds", elapsed},
                      {"episodes", config.episodes},
                      {"seeds", config.seeds},
                      {"config", config.to_json()}};
        std::ofstream os(config.out_dir + "/run.json");
        os << run_info.dump(2) << '\n';
    }
    if (config.export_frames && !result.trials.empty())
        export_episode_frames(config, result.trials.front(), config.out_dir + "/frames");
    if (config.plot) write_plots(result.trials, config.out_dir);
    return result;
}

std::vector<Variant> variants_from_json(const json& j) {
    std::vector<Variant> variants;
    check_arg(j.is_array(), "variants must be an array");
    for (const auto& v : j) {
        Variant variant;
        variant.name = v.value("name", std::string());
        if (variant.name.empty()) throw ConfigError("variant without a name");
        variant.overrides = v.value("overrides", json::object());
        variants.push_back(std::move(variant));
    }
    return variants;
}

std::vector<std::pair<std::string, TrainResult>> run_compare(const ExperimentConfig& base,
                                                             const std::vector<Variant>& variants,
                                                             const std::string& out_dir) {
    if (variants.size() < 2) throw ConfigError("compare needs at least two variants");
    std::set<std::string> names;
    for (const auto& v : variants)
        if (!names.insert(v.name).second) throw ConfigError("variant name collision: " + v.name);

    fs::create_directories(out_dir);
    std::ofstream os(out_dir + "/compare.csv");
    if (!os) throw ConfigError("output path is not writable: " + out_dir);

    std::vector<std::pair<std::string, TrainResult>> results;
    for (const auto& v : variants) {
        json patched = base.to_json();
        patched.merge_patch(v.overrides);
        ExperimentConfig config = ExperimentConfig::from_json(patched);
        config.seeds = base.seeds;  // identical seeds and streams across variants
        results.emplace_back(v.name, run_trials(config));
    }
    write_compare_csv(os, results);

    std::vector<PlotSeries> returns, surprises;
    static const char* kVariantColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#8c564b"};
    for (std::size_t i = 0; i < results.size(); ++i) {
        PlotSeries r, s;
        r.label = s.label = results[i].first;
        r.color = s.color = kVariantColors[i % 5];
        r.stroke_width = s.stroke_width = 1.5;
        const auto& trials = results[i].second.trials;
        const std::size_t episodes = trials[0].summaries.size();
        for (std::size_t e = 0; e < episodes; ++e) {
            double rsum = 0.0, ssum = 0.0;
            int scount = 0;
            for (const auto& t : trials) {
                rsum += t.summaries[e].total_reward;
                const double v = t.summaries[e].mean_surprise.empty()
                                     ? std::numeric_limits<double>::quiet_NaN()
                                     : t.summaries[e].mean_surprise[0];
                if (!std::isnan(v)) {
                    ssum += v;
                    ++scount;
                }
            }
            r.x.push_back(static_cast<double>(e));
            r.y.push_back(rsum / trials.size());
            s.x.push_back(static_cast<double>(e));
            s.y.push_back(scount ? ssum / scount : std::numeric_limits<double>::quiet_NaN());
        }
        returns.push_back(std::move(r));
        surprises.push_back(std::move(s));
    }
    {
        std::ofstream plot_os(out_dir + "/compare_return.svg");
        plot_os << render_line_chart("Mean return by variant", "episode", "return", returns);
    }
    {
        std::ofstream plot_os(out_dir + "/compare_surprise.svg");
        plot_os << render_line_chart("Mean 1-step surprise by variant", "episode", "surprise",
                                     surprises);
    }
    return results;
}

InspectReport inspect_checkpoint(const TrialCheckpoint& c) {
    InspectReport report;
    report.topology = c.topology;
    report.segments_per_var.assign(c.topology.n_vars, 0);
    report.f_histogram.assign(10, 0);
    for (const auto& seg : c.memory.slots) {
        if (seg.owner < 0) continue;
        ++report.segment_count;
        ++report.segments_per_var[c.topology.var_of(seg.owner)];
        int bin = static_cast<int>(seg.f * 10.0);
        bin = std::clamp(bin, 0, 9);
        ++report.f_histogram[bin];
    }
    double min_norm = std::numeric_limits<double>::infinity(), max_norm = 0.0, sum_norm = 0.0;
    for (int i = 0; i < c.sr_rows; ++i) {
        double norm = 0.0;
        for (int j = 0; j < c.sr_cols; ++j) {
            const double v = c.sr_data[static_cast<std::size_t>(i) * c.sr_cols + j];
            norm += v * v;
        }
        norm = std::sqrt(norm);
        min_norm = std::min(min_norm, norm);
        max_norm = std::max(max_norm, norm);
        sum_norm += norm;
    }
    report.sr_row_norm_min = c.sr_rows ? min_norm : 0.0;
    report.sr_row_norm_max = max_norm;
    report.sr_row_norm_mean = c.sr_rows ? sum_norm / c.sr_rows : 0.0;
    report.encoder_stage = c.encoder.stage ? "adult" : "newborn";
    report.encoder_steps_remaining = c.encoder.steps_remaining;
    return report;
}

void print_report(std::ostream& os, const InspectReport& r) {
    os << "topology: " << r.topology.n_vars << " vars x " << r.topology.n_obs_states
       << " obs states x " << r.topology.cells_per_column << " cells/column, "
       << r.topology.n_action_states << " action states\n";
    os << "encoder stage: " << r.encoder_stage;
    if (r.encoder_stage == "newborn") os << " (" << r.encoder_steps_remaining << " steps left)";
    os << '\n';
    os << "segments: " << r.segment_count << " total\n";
    for (std::size_t v = 0; v < r.segments_per_var.size(); ++v)
        os << "  var " << v << ": " << r.segments_per_var[v] << '\n';
    os << "f histogram (bins of 0.1):";
    for (int b : r.f_histogram) os << ' ' << b;
    os << '\n';
    os << "SR row norms: min " << num(r.sr_row_norm_min) << " mean " << num(r.sr_row_norm_mean)
       << " max " << num(r.sr_row_norm_max) << '\n';
}

namespace {

std::vector<std::string> split(const std::string& line, char sep) {
    std::vector<std::string> out;
    std::string field;
    std::istringstream ss(line);
    while (std::getline(ss, field, sep)) out.push_back(field);
    if (!line.empty() && line.back() == sep) out.push_back("");
    return out;
}

}  // namespace

std::vector<std::string> plot_csv(const std::string& csv_path, const std::string& out_dir) {
    std::ifstream is(csv_path);
    if (!is) throw ConfigError("cannot open CSV: " + csv_path);
    std::string header;
    if (!std::getline(is, header)) throw ConfigError("empty CSV: " + csv_path);
    const std::vector<std::string> cols = split(header, ',');
    fs::create_directories(out_dir);
    std::vector<std::string> written;

    if (!cols.empty() && cols[0] == "variant") {
        // compare.csv: average per (variant, episode) over seeds.
        std::map<std::string, std::map<int, std::pair<double, int>>> ret, sur;
        std::string line;
        while (std::getline(is, line)) {
            const auto f = split(line, ',');
            if (f.size() < 6) continue;
            const int episode = std::stoi(f[2]);
            ret[f[0]][episode].first += std::stod(f[3]);
            ret[f[0]][episode].second += 1;
            if (!f[5].empty()) {
                sur[f[0]][episode].first += std::stod(f[5]);
                sur[f[0]][episode].second += 1;
            }
        }
        static const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#8c564b"};
        auto build = [&](std::map<std::string, std::map<int, std::pair<double, int>>>& data) {
            std::vector<PlotSeries> series;
            std::size_t i = 0;
            for (auto& [name, by_ep] : data) {
                PlotSeries s;
                s.label = name;
                s.color = kColors[i++ % 5];
                s.stroke_width = 1.5;
                for (auto& [ep, acc] : by_ep) {
                    s.x.push_back(ep);
                    s.y.push_back(acc.first / acc.second);
                }
                series.push_back(std::move(s));
            }
            return series;
        };
        const std::string rp = out_dir + "/compare_return.svg";
        std::ofstream(rp) << render_line_chart("Mean return by variant", "episode", "return",
                                               build(ret));
        written.push_back(rp);
        const std::string sp = out_dir + "/compare_surprise.svg";
        std::ofstream(sp) << render_line_chart("Mean 1-step surprise by variant", "episode",
                                               "surprise", build(sur));
        written.push_back(sp);
        return written;
    }

    if (cols.empty() || cols[0] != "episode")
        throw ConfigError("unrecognized CSV header: " + header);
    // episodes.csv: per-seed traces plus the mean column.
    std::vector<int> return_cols, surprise_cols;
    int return_mean = -1, surprise_mean = -1;
    for (std::size_t i = 1; i < cols.size(); ++i) {
        if (cols[i].rfind("return_s", 0) == 0) return_cols.push_back(static_cast<int>(i));
        if (cols[i] == "return_mean") return_mean = static_cast<int>(i);
        if (cols[i].rfind("surprise1_s", 0) == 0) surprise_cols.push_back(static_cast<int>(i));
        if (cols[i] == "surprise1_mean") surprise_mean = static_cast<int>(i);
    }
    std::vector<std::vector<std::string>> rows;
    std::string line;
    while (std::getline(is, line))
        if (!line.empty()) rows.push_back(split(line, ','));
    auto series_for = [&](const std::vector<int>& idx, int mean_idx) {
        static const char* kSeedColors[] = {"#9ecae1", "#a1d99b", "#fdae6b", "#bcbddc", "#fc9272"};
        std::vector<PlotSeries> series;
        for (std::size_t i = 0; i < idx.size(); ++i) {
            PlotSeries s;
            s.label = cols[idx[i]];
            s.color = kSeedColors[i % 5];
            for (const auto& r : rows) {
                if (idx[i] >= static_cast<int>(r.size()) || r[idx[i]].empty()) continue;
                s.x.push_back(std::stod(r[0]));
                s.y.push_back(std::stod(r[idx[i]]));
            }
            series.push_back(std::move(s));
        }
        if (mean_idx >= 0) {
            PlotSeries m;
            m.label = "mean";
            m.color = "#d62728";
            m.stroke_width = 2.0;
            for (const auto& r : rows) {
                if (mean_idx >= static_cast<int>(r.size()) || r[mean_idx].empty()) continue;
                m.x.push_back(std::stod(r[0]));
                m.y.push_back(std::stod(r[mean_idx]));
            }
            series.push_back(std::move(m));
        }
        return series;
    };
    const std::string rp = out_dir + "/return_vs_episode.svg";
    std::ofstream(rp) << render_line_chart("Episode return", "episode", "return",
                                           series_for(return_cols, return_mean));
    written.push_back(rp);
    const std::string sp = out_dir + "/surprise_vs_episode.svg";
    std::ofstream(sp) << render_line_chart("1-step surprise", "episode", "surprise",
                                           series_for(surprise_cols, surprise_mean));
    written.push_back(sp);
    return written;
}

}  // namespace dhtm
