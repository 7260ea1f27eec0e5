#pragma once

#include "sparselets/image.hpp"
#include "sparselets/loggabor.hpp"

#include <filesystem>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace sparselets {

struct PursuitParams {
    /// Fraction of each selected projection removed from the residual, in (0, 1].
    double alpha = 0.8;
    /// Maximum number of pursuit steps.
    int max_edges = 2048;
    /// Stop once the residual energy falls to this fraction of the input energy.
    double energy_threshold = 0.03;
    /// Scores within this relative distance of the maximum count as ties,
    /// resolved by the lowest linear index.
    double tie_epsilon = 1e-12;
    /// Steps between full re-analyses of the residual; 0 disables them.
    int refresh_interval = 256;
    /// Cross-correlation kernel entries below this magnitude are dropped from
    /// incremental coefficient updates; 0 keeps them all.
    double kernel_tolerance = 1e-4;

    void validate() const;
    bool operator==(const PursuitParams&) const = default;
};

struct Edge {
    Address address;
    double theta = 0.0;  // radians, (-pi/2, pi/2]
    cdouble coeff;       // accumulated sparse coefficient
    int step = 0;        // step at which the address was first selected
};

/// What one pursuit step did.
struct StepRecord {
    std::size_t edge = 0;          // index into EdgeList::edges
    cdouble selected;              // projection a_i of the residual on the chosen atom
    double residual_energy = 0.0;  // measured ||R||^2 after the step
    double stack_drift = 0.0;      // |incremental coefficient - exact projection| before the step
};

struct EdgeList {
    std::vector<Edge> edges;
    std::vector<StepRecord> steps;
    int image_size = 0;
    BankParams bank_params;
    double initial_energy = 0.0;
    double alpha = 1.0;

    std::size_t size() const { return edges.size(); }
    bool empty() const { return edges.empty(); }
    /// Steps that selected an address already in the list.
    std::size_t repeat_count() const { return steps.size() - edges.size(); }
};

struct NothingToMatch : std::runtime_error {
    NothingToMatch() : std::runtime_error("coefficient stack is identically zero") {}
};

struct Match {
    Address address;
    std::size_t index = 0;
    cdouble value;
};

/// Exhaustive argmax of |a_j| with deterministic tie-breaking; empty when all
/// coefficients vanish.
std::optional<Match> best_match(const CoefficientStack& stack, double tie_epsilon = 1e-12);

/// Incremental Matching Pursuit state over one image.
///
/// Selection reads the coefficient stack, which is kept up to date by
/// subtracting cached cross-correlation kernels and is re-synchronized with
/// the residual every `refresh_interval` steps. The projection actually
/// removed is recomputed exactly against the residual image, so the residual
/// energy drops by alpha * (2 - alpha) * |a|^2 at every step.
class Pursuit {
public:
    Pursuit(const Image& img, const LogGaborBank& bank, const PursuitParams& params);
    /// Starts from a precomputed stack, assumed equal to analyze(img, bank).
    Pursuit(const Image& img, CoefficientStack stack, const PursuitParams& params);

    /// Performs one step; empty when no atom correlates with the residual.
    std::optional<StepRecord> step();
    /// True once a stopping criterion holds.
    bool done() const;
    /// Runs step() until done().
    void run();

    const Image& residual() const { return residual_; }
    double residual_energy() const { return residual_energy_; }
    const CoefficientStack& stack() const { return stack_; }
    const EdgeList& edges() const { return edges_; }
    EdgeList take_edges() { return std::move(edges_); }
    const LogGaborBank& bank() const { return bank_; }
    const PursuitParams& params() const { return params_; }
    int steps_taken() const { return static_cast<int>(edges_.steps.size()); }

    /// Switches selection to score = |a|^2 / 2 + bias, with a zero bias grid
    /// laid out like the stack.
    void enable_bias();
    bool has_bias() const { return !bias_.empty(); }
    std::span<double> bias() { return bias_; }
    /// Re-derives cached maxima for a (wrapping) window of one channel's grid
    /// after its bias entries changed.
    void invalidate(int channel, int gx0, int gy0, int width, int height);

    /// Called after each step with the edge and the change of its modulus.
    using AcceptHook = std::function<void(Pursuit&, const Edge&, double modulus_change)>;
    void on_accept(AcceptHook hook) { hook_ = std::move(hook); }

private:
    struct Tile {
        double best = 0.0;
        std::size_t index = 0;
    };
    double score(std::size_t i) const;
    void recompute_tile(int channel, int tx, int ty);
    void rebuild_tiles();
    std::optional<std::size_t> select() const;
    void update_stack(int channel, const Address& at, cdouble a);

    LogGaborBank bank_;
    PursuitParams params_;
    Image residual_;
    double residual_energy_ = 0.0;
    CoefficientStack stack_;
    std::vector<double> bias_;
    int tile_size_ = 16;
    std::vector<std::size_t> tile_offset_;
    std::vector<int> tiles_per_dim_;
    std::vector<Tile> tiles_;
    EdgeList edges_;
    std::vector<std::pair<std::size_t, std::size_t>> edge_of_;  // sorted (linear index, edge)
    AcceptHook hook_;
    bool exhausted_ = false;
};

struct StepResult {
    Edge edge;
    Image residual;
    CoefficientStack stack;
};

/// One pursuit step from (img, stack): the returned stack is updated
/// incrementally with untruncated kernels. Throws NothingToMatch.
StepResult pursue_step(const Image& img, const CoefficientStack& stack, double alpha);

/// Matching Pursuit until the residual energy reaches the threshold or
/// max_edges steps ran. The input is expected to be whitened and masked.
EdgeList extract(const Image& img, const LogGaborBank& bank, const PursuitParams& params);

/// Sum of Re(s_i * atom_i). Throws when the list was made with another bank.
Image reconstruct(const EdgeList& edges, const LogGaborBank& bank);

/// E_N = 1 - alpha (2 - alpha) sum_{k<=N} |a_k|^2 / ||I||^2 for N = 0..steps.
std::vector<double> energy_curve(const EdgeList& edges, double alpha);
/// Recorded ||R_N||^2 / ||I||^2 for N = 0..steps.
std::vector<double> measured_energy_curve(const EdgeList& edges);

std::string edges_to_json(const EdgeList& edges);
EdgeList edges_from_json(const std::string& text);
void save_edges(const std::filesystem::path& path, const EdgeList& edges);
EdgeList load_edges(const std::filesystem::path& path);

}  // namespace sparselets
