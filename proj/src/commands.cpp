#include "boostedseq/commands.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <ostream>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "boostedseq/boosting.hpp"
#include "boostedseq/checkpoint.hpp"
#include "boostedseq/embeddings.hpp"
#include "boostedseq/eval.hpp"
#include "boostedseq/gradcheck.hpp"
#include "boostedseq/parallel.hpp"
#include "json.hpp"

namespace fs = std::filesystem;

namespace boostedseq {

namespace {

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

// Provenance header carried by every text artifact.
std::string config_line(const RunConfig& cfg) { return "# config = " + cfg.echo() + "\n"; }

// Settings as `key = value` lines, loadable again through --config.
std::string config_file(const RunConfig& cfg) {
  std::string text = config_line(cfg);
  const auto settings = nlohmann::json::parse(cfg.echo());
  for (const auto& [key, value] : settings.items()) {
    text += key + " = " + (value.is_string() ? value.get<std::string>() : value.dump()) + "\n";
  }
  return text;
}

std::string format_epoch(const EpochLog& e) {
  return fmt::format("round={} epoch={} mean_loss={:.6f} weighted_error={:.6f} lr={:.6g}", e.round,
                     e.epoch, e.mean_loss, e.weighted_error, e.lr);
}

bool require_path(const std::string& value, const char* flag, std::ostream& err) {
  if (!value.empty()) return true;
  err << "error: missing required " << flag << " PATH\n";
  return false;
}

// Ensemble probabilities for every sentence of `data`, in dataset order.
std::vector<Vector> score_sentences(const Dataset& data, const EnsembleCheckpoint& ckpt,
                                    std::size_t threads) {
  std::vector<Vector> probs(data.size());
  parallel_for(data.size(), threads, [&](std::size_t i) {
    const auto row = encode_sentence(data.sentences[i], ckpt.vocab, ckpt.encoding);
    probs[i] = ensemble_predict(row, ckpt.ensemble);
  });
  return probs;
}

struct Loaded {
  EnsembleCheckpoint ckpt;
  Dataset test;
};

Loaded load_for_eval(const RunConfig& cfg) {
  Loaded l;
  l.ckpt = read_checkpoint(cfg.checkpoint());
  l.test = load_dataset(cfg.test_path);
  if (l.test.relation_names != l.ckpt.relation_names) {
    throw std::runtime_error("checkpoint/config mismatch: relation set of " + cfg.test_path +
                             " differs from the one the checkpoint was trained on");
  }
  return l;
}

template <class Fn>
int guarded(std::ostream& err, Fn&& fn) {
  try {
    return fn();
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace

int cmd_train(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    cfg.validate();
    if (!require_path(cfg.train_path, "--train", err)) return 2;
    const Dataset train = load_dataset(cfg.train_path);
    const Vocabulary vocab = Vocabulary::build(train, cfg.min_count);
    spdlog::info("loaded {} training sentences, {} relations, vocabulary {}", train.size(),
                 train.num_relations(), vocab.size());

    std::optional<Matrix> word_table;
    if (!cfg.vectors_path.empty()) {
      Rng wv_rng = Rng(cfg.boost.seed).split(streams::kWordVectors);
      word_table = load_word_vectors(cfg.vectors_path, vocab, cfg.train.word_dim, wv_rng);
    }

    fs::create_directories(cfg.out_dir);
    const fs::path dir(cfg.out_dir);
    std::ofstream log(dir / "train.log", std::ios::binary);
    log << config_line(cfg);
    const auto result = run_boosting(train, vocab, cfg.train, cfg.boost, word_table,
                                     [&log](const EpochLog& e) {
                                       const auto line = format_epoch(e);
                                       log << line << '\n';
                                       spdlog::info("{}", line);
                                     });
    for (const auto& r : result.history) {
      log << fmt::format("round={} selected_epoch={} error={:.17g} clf_weight={:.17g}\n", r.round,
                         r.selected_epoch, r.error, r.clf_weight);
    }

    EnsembleCheckpoint ckpt;
    ckpt.config_echo = cfg.echo();
    ckpt.seed = cfg.boost.seed;
    ckpt.relation_names = train.relation_names;
    ckpt.vocab = vocab;
    ckpt.encoding = cfg.train.encoding();
    ckpt.ensemble = result.ensemble;
    ckpt.history = result.history;
    write_checkpoint(ckpt, cfg.checkpoint());
    std::string vocab_text = config_line(cfg);
    for (const auto& t : vocab.regular_tokens()) vocab_text += t + "\n";
    write_text(dir / "vocab.txt", vocab_text);
    write_text(dir / "config.txt", config_file(cfg));

    out << fmt::format("{:>5} {:>6} {:>12} {:>12}\n", "round", "epoch", "error", "clf_weight");
    for (const auto& r : result.history) {
      out << fmt::format("{:>5} {:>6} {:>12.6f} {:>12.6f}\n", r.round, r.selected_epoch, r.error,
                         r.clf_weight);
    }
    out << "checkpoint: " << cfg.checkpoint().string() << '\n';
    return 0;
  });
}

int cmd_eval(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    if (!require_path(cfg.test_path, "--test", err)) return 2;
    const auto [ckpt, test] = load_for_eval(cfg);
    const auto probs = score_sentences(test, ckpt, cfg.train.threads);
    const auto bags = group_bags(test);

    EvalReport report;
    report.num_bags = bags.size();
    report.num_sentences = test.size();
    report.sampling_seed = cfg.boost.seed;
    const Rng sampling = Rng(cfg.boost.seed).split(streams::kEvalSampling);
    for (SelectMode mode : cfg.modes) {
      Rng rng = sampling.split(static_cast<std::uint64_t>(mode));
      report.modes.push_back(evaluate_mode(bags, probs, mode, rng, cfg.bag_aggregate));
    }

    fs::create_directories(cfg.out_dir);
    const fs::path dir(cfg.out_dir);
    write_text(dir / "report.txt", format_report(report, cfg.echo()));
    for (const auto& m : report.modes) {
      write_text(dir / ("pr_" + to_string(m.mode) + ".csv"), config_line(cfg) + format_pr_csv(m.curve));
    }
    out << format_p_at_n_table(report);
    for (const auto& m : report.modes) {
      out << fmt::format("max-F1 ({}) = {:.2f}\n", to_string(m.mode), m.curve.max_f1);
    }
    return 0;
  });
}

int cmd_predict(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    if (!require_path(cfg.test_path, "--test", err)) return 2;
    const auto [ckpt, test] = load_for_eval(cfg);
    const auto probs = score_sentences(test, ckpt, cfg.train.threads);
    std::string text = config_line(cfg);
    text += "index\tbag_key\tgold\tpredicted\tconfidence\n";
    std::size_t correct = 0;
    for (std::size_t i = 0; i < test.size(); ++i) {
      const std::size_t pred = argmax(probs[i]);
      const auto& s = test.sentences[i];
      if (static_cast<int>(pred) == s.relation) ++correct;
      text += fmt::format("{}\t{}\t{}\t{}\t{:.6f}\n", i, s.bag_key,
                          test.relation_names[static_cast<std::size_t>(s.relation)],
                          test.relation_names[pred], probs[i][pred]);
    }
    fs::create_directories(cfg.out_dir);
    write_text(fs::path(cfg.out_dir) / "predictions.tsv", text);
    out << fmt::format("sentences={} accuracy={:.4f}\n", test.size(),
                       test.size() ? static_cast<double>(correct) / static_cast<double>(test.size())
                                   : 0.0);
    return 0;
  });
}

int cmd_synth(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    Rng rng = Rng(cfg.boost.seed).split(streams::kSynth);
    const auto corpus = generate_synthetic(cfg.synth, rng);
    fs::create_directories(cfg.out_dir);
    const fs::path dir(cfg.out_dir);
    write_text(dir / "train.txt", config_line(cfg) + format_dataset(corpus.train));
    write_text(dir / "test.txt", config_line(cfg) + format_dataset(corpus.test));

    auto histogram = [](const Dataset& d) {
      std::vector<std::size_t> h(d.num_relations(), 0);
      for (const auto& s : d.sentences) ++h[static_cast<std::size_t>(s.relation)];
      return h;
    };
    const auto htrain = histogram(corpus.train);
    const auto htest = histogram(corpus.test);
    out << fmt::format("{:<8} {:>8} {:>8}\n", "label", "train", "test");
    for (std::size_t r = 0; r < htrain.size(); ++r) {
      out << fmt::format("{:<8} {:>8} {:>8}\n", corpus.train.relation_names[r], htrain[r],
                         htest[r]);
    }
    const double n = static_cast<double>(cfg.synth.n_train);
    const double p = cfg.synth.label_noise_rate;
    out << fmt::format("corrupted={} expected={:.1f} sd={:.1f}\n", corpus.corrupted, n * p,
                       std::sqrt(n * p * (1.0 - p)));
    return 0;
  });
}

int cmd_gradcheck(const RunConfig& cfg, const GradCheckRequest& req, std::ostream& out,
                  std::ostream& err) {
  return guarded(err, [&] {
    bool ok = true;
    double worst = 0.0;
    const auto cases = standard_gradcheck_cases();
    const std::size_t n = std::min(req.configurations, cases.size());
    for (std::size_t i = 0; i < n; ++i) {
      const auto& c = cases[i];
      const auto toy = make_toy_problem(c.spec, cfg.boost.seed + i);
      for (double h : req.steps) {
        GradCheckOptions opts;
        opts.step = h;
        opts.tolerance = req.tolerance;
        opts.loss_scale = c.loss_scale;
        opts.l2_lambda = c.l2_lambda;
        opts.corrupt_block = req.corrupt_block;
        const auto r = check_gradients(toy.model, toy.batch, opts);
        worst = std::max(worst, r.max_rel_err);
        out << fmt::format("[{}] case {} ({}) h={:g} max_rel_err={:.3e} worst_block={}\n",
                           r.passed ? "PASS" : "FAIL", i + 1, c.label, h, r.max_rel_err,
                           r.worst_block);
        if (!r.passed) {
          ok = false;
          for (const auto& b : r.blocks) {
            if (b.max_rel_err > req.tolerance) {
              out << fmt::format("  block {} rel_err={:.3e}\n", b.name, b.max_rel_err);
            }
          }
        }
      }
    }
    out << fmt::format("gradcheck {}: max_rel_err={:.3e} tolerance={:g}\n", ok ? "passed" : "FAILED",
                       worst, req.tolerance);
    return ok ? 0 : 1;
  });
}

}  // namespace boostedseq
