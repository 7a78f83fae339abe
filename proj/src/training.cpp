#include "mcp/training.hpp"

#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <thread>

namespace mcp {

AdamState adam_update(AdamState s, std::span<const double> grad, double lr) {
    if (grad.size() != s.x.size()) throw InvalidInput("adam: gradient length does not match parameters");
    for (double g : grad)
        if (!std::isfinite(g)) throw DivergedRun("non-finite gradient");
    ++s.step;
    const double c1 = 1.0 - std::pow(s.beta1, static_cast<double>(s.step));
    const double c2 = 1.0 - std::pow(s.beta2, static_cast<double>(s.step));
    for (std::size_t i = 0; i < s.x.size(); ++i) {
        s.m[i] = s.beta1 * s.m[i] + (1.0 - s.beta1) * grad[i];
        s.v[i] = s.beta2 * s.v[i] + (1.0 - s.beta2) * grad[i] * grad[i];
        const double mhat = s.m[i] / c1;
        const double vhat = s.v[i] / c2;
        s.x[i] -= lr * mhat / (std::sqrt(vhat) + s.eps);
    }
    return s;
}

void Schedule::validate() const {
    if (!(decay_factor > 0.0 && decay_factor < 1.0)) throw InvalidInput("decay factor must lie in (0,1)");
    if (!(min_lr > 0.0)) throw InvalidInput("learning-rate floor must be positive");
    if (!(initial_lr >= 0.0)) throw InvalidInput("learning rate must be non-negative");
    if (patience_epochs < 0) throw InvalidInput("patience must be non-negative");
}

double PlateauTracker::update(double loss) {
    if (loss < best_ - schedule_.min_improvement) {
        best_ = loss;
        stale_ = 0;
    } else if (++stale_ >= schedule_.patience_epochs) {
        lr_ = std::max(lr_ * schedule_.decay_factor, std::min(schedule_.min_lr, lr_));
        stale_ = 0;
    }
    return lr_;
}

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

bool finite_all(std::span<const double> v) {
    for (double x : v)
        if (!std::isfinite(x)) return false;
    return true;
}

}  // namespace

RawParams initial_raw(const ModelConfig& config, std::uint64_t master_seed, std::uint64_t seed, double low,
                      double high) {
    std::uint64_t state = splitmix64(master_seed ^ splitmix64(seed + 1));
    RawParams raw;
    for (std::size_t i = 0; i < active_params(config).size(); ++i) {
        state = splitmix64(state);
        const double u = static_cast<double>(state >> 11) * 0x1.0p-53;
        raw.values.push_back(low + (high - low) * u);
    }
    return raw;
}

TrainingRunRecord train_run(const CalibrationProblem& problem, std::uint64_t seed, const Schedule& schedule,
                            const TrainingOptions& options, const std::optional<RawParams>& init_raw) {
    schedule.validate();
    const auto& config = problem.train.config;
    TrainingRunRecord rec;
    rec.seed = seed;
    rec.initial_lr = schedule.initial_lr;
    AdamState opt(init_raw ? init_raw->values
                           : initial_raw(config, options.master_seed, seed, options.init_low, options.init_high).values);
    PlateauTracker plateau(schedule);

    RawParams best{opt.x};
    double best_loss = std::numeric_limits<double>::infinity();
    try {
        for (int epoch = 0; epoch < options.epochs; ++epoch) {
            const auto ev = loss_and_gradient(problem.train, RawParams{opt.x});
            if (!std::isfinite(ev.loss) || !finite_all(ev.gradient))
                throw DivergedRun("non-finite loss or gradient at epoch " + std::to_string(epoch));
            rec.loss_trace.push_back(ev.loss);
            if (ev.loss < best_loss) {
                best_loss = ev.loss;
                best.values = opt.x;
            }
            opt = adam_update(std::move(opt), ev.gradient, plateau.lr());
            plateau.update(ev.loss);
            rec.epochs_run = epoch + 1;
        }
        if (finite_all(opt.x)) {
            const double last = evaluate_loss(problem.train, RawParams{opt.x}).loss;
            if (last < best_loss) {
                best_loss = last;
                best.values = opt.x;
            }
        }
        if (!std::isfinite(best_loss)) throw DivergedRun("no finite training loss");
        rec.final_raw = best;
        rec.train_kge = 1.0 - best_loss;
        rec.val_kge = evaluate_loss(problem.val, best).kge_report.kge;
        if (!std::isfinite(rec.val_kge)) throw DivergedRun("non-finite validation KGE");
    } catch (const DegenerateData&) {
        throw;
    } catch (const Error& e) {
        rec.failed = true;
        rec.failure = e.what();
        rec.final_raw = best;
        rec.val_kge = std::numeric_limits<double>::quiet_NaN();
        if (!std::isfinite(best_loss)) rec.train_kge = std::numeric_limits<double>::quiet_NaN();
    }
    return rec;
}

std::size_t select_best(const std::vector<TrainingRunRecord>& runs) {
    std::optional<std::size_t> best;
    for (std::size_t i = 0; i < runs.size(); ++i) {
        const auto& r = runs[i];
        if (r.failed || !std::isfinite(r.val_kge)) continue;
        if (!best) {
            best = i;
            continue;
        }
        const auto& b = runs[*best];
        if (r.val_kge > b.val_kge || (r.val_kge == b.val_kge && r.seed < b.seed)) best = i;
    }
    if (!best) throw AllRunsFailed("every training run diverged");
    return *best;
}

std::vector<TrainingRunRecord> run_parallel(std::size_t count, unsigned workers,
                                            const std::function<TrainingRunRecord(std::size_t)>& job) {
    std::vector<TrainingRunRecord> out(count);
    if (workers <= 1 || count <= 1) {
        for (std::size_t i = 0; i < count; ++i) out[i] = job(i);
        return out;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    auto worker = [&] {
        for (std::size_t i = next++; i < count; i = next++) {
            try {
                out[i] = job(i);
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (!error) error = std::current_exception();
            }
        }
    };
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < std::min<std::size_t>(workers, count); ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
    return out;
}

StageResult stage1_explore(const CalibrationProblem& problem, const Protocol& protocol) {
    Schedule schedule = protocol.schedule;
    schedule.initial_lr = protocol.explore_lr;
    StageResult result;
    result.runs = run_parallel(protocol.n_seeds, protocol.workers, [&](std::size_t i) {
        auto rec = train_run(problem, i, schedule, protocol.training);
        rec.stage = Stage::Explore;
        return rec;
    });
    result.best = select_best(result.runs);
    return result;
}

StageResult stage2_refine(const TrainingRunRecord& best, const CalibrationProblem& problem, const Protocol& protocol) {
    StageResult result;
    result.runs = run_parallel(protocol.refine_lrs.size(), protocol.workers, [&](std::size_t i) {
        Schedule schedule = protocol.schedule;
        schedule.initial_lr = protocol.refine_lrs[i];
        auto rec = train_run(problem, best.seed, schedule, protocol.training, best.final_raw);
        rec.stage = Stage::Refine;
        return rec;
    });
    // a fully diverged refinement stage is not an error: the explorer stays eligible
    try {
        result.best = select_best(result.runs);
    } catch (const AllRunsFailed&) {
        result.best = result.runs.size();
    }
    return result;
}

CalibrationResult calibrate(const CalibrationProblem& problem, const Protocol& protocol) {
    auto explore = stage1_explore(problem, protocol);
    auto refine = stage2_refine(explore.runs[explore.best], problem, protocol);
    CalibrationResult result;
    result.runs = std::move(explore.runs);
    result.runs.insert(result.runs.end(), std::make_move_iterator(refine.runs.begin()),
                       std::make_move_iterator(refine.runs.end()));
    result.selected = select_best(result.runs);
    return result;
}

}  // namespace mcp
