#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <ostream>
#include <string>

#include "fgdfpn/checkpoint.hpp"
#include "fgdfpn/data.hpp"
#include "fgdfpn/loss.hpp"
#include "fgdfpn/model.hpp"
#include "fgdfpn/optim.hpp"

namespace fgdfpn {

struct TrainLogRow {
  int64_t iter;
  double lr, loss, seconds;
};

struct TrainResult {
  int64_t iters_done = 0;
  double final_loss = 0;
  bool aborted_nan = false;
  std::vector<TrainLogRow> log;
};

inline constexpr const char* kTrainLogHeader = "iter,lr,loss,seconds";

/// Mutable training state that persists across resume.
template <typename T>
struct TrainState {
  Adam<T> adam;
  Rng rng{1};
  int64_t iter = 0;

  TrainState(const TrainConfig& cfg)
      : adam(cfg.beta1, cfg.beta2, cfg.adam_eps), rng(cfg.seed) {}
};

template <typename T>
void save_train_checkpoint(FGDFPN<T>& model, TrainState<T>& state, const std::string& path) {
  CheckpointWriter w;
  add_model(w, model);
  state.adam.save(w, model.parameters());
  w.add("train/iter", Tensor<double>::scalar(static_cast<double>(state.iter)));
  std::string rng_bytes(32, '\0');
  const auto st = state.rng.state();
  std::memcpy(rng_bytes.data(), st.data(), 32);
  w.add_bytes("train/rng", rng_bytes);
  w.write(path);
}

template <typename T>
void load_train_checkpoint(FGDFPN<T>& model, TrainState<T>& state, const std::string& path) {
  CheckpointReader r(path);
  load_model(model, r);
  state.adam.load(r, model.parameters());
  state.iter = static_cast<int64_t>(r.tensor<double>("train/iter")[0]);
  const std::string rng_bytes = r.bytes("train/rng");
  if (rng_bytes.size() != 32) throw CheckpointError("checkpoint: bad train/rng record");
  std::array<uint64_t, 4> st;
  std::memcpy(st.data(), rng_bytes.data(), 32);
  state.rng.set_state(st);
}

/// One full training run (or the remainder of one, when resuming): per
/// iteration draw a batch, forward, Charbonnier loss, backward, Adam step at
/// the scheduled rate. Checkpoints at the configured cadence and at the end.
template <typename T>
TrainResult train_loop(FGDFPN<T>& model, TrainState<T>& state, const ClipDataset& data,
                       const TrainConfig& cfg, std::ostream* log_csv,
                       const std::string& ckpt_path,
                       const std::function<void(const TrainLogRow&)>& on_iter = nullptr) {
  cfg.validate();
  TrainResult res;
  if (log_csv && state.iter == 0) (*log_csv) << kTrainLogHeader << "\n";
  const auto t0 = std::chrono::steady_clock::now();
  auto params = model.parameters();

  for (; state.iter < cfg.total_iters; ++state.iter) {
    const double lr = lr_schedule(state.iter, cfg);
    auto [input, target] = random_crop_batch(data, cfg.batch_size, cfg.crop, state.rng);

    Tape<T> tape;
    Var<T> pred = model.forward(tape, tape.leaf(std::move(input)));
    Var<T> loss = charbonnier_loss(tape, pred, tape.leaf(std::move(target)),
                                   static_cast<T>(cfg.charbonnier_eps));
    const double loss_v = static_cast<double>(loss.value()[0]);
    if (!std::isfinite(loss_v)) {
      res.aborted_nan = true;  // the checkpoint from the previous cadence survives
      break;
    }
    tape.backward(loss);
    if (cfg.clip_grad_norm > 0) Adam<T>::clip_global_norm(params, cfg.clip_grad_norm);
    state.adam.step(params, lr);

    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    TrainLogRow row{state.iter, lr, loss_v, secs};
    res.log.push_back(row);
    res.final_loss = loss_v;
    if (log_csv)
      (*log_csv) << row.iter << ',' << row.lr << ',' << row.loss << ',' << row.seconds << "\n";
    if (on_iter) on_iter(row);

    if (!ckpt_path.empty() && cfg.checkpoint_every > 0 &&
        (state.iter + 1) % cfg.checkpoint_every == 0 && state.iter + 1 < cfg.total_iters) {
      ++state.iter;  // checkpoint records the next iteration to run
      save_train_checkpoint(model, state, ckpt_path);
      --state.iter;
    }
  }
  res.iters_done = state.iter;
  if (!ckpt_path.empty() && !res.aborted_nan) save_train_checkpoint(model, state, ckpt_path);
  return res;
}

}  // namespace fgdfpn
