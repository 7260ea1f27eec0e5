#include "sparselets/pursuit.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

namespace sparselets {

using nlohmann::json;

void PursuitParams::validate() const {
    if (!(alpha > 0.0 && alpha <= 1.0)) throw std::invalid_argument("pursuit: alpha must lie in (0, 1]");
    if (max_edges < 0) throw std::invalid_argument("pursuit: max_edges must be non-negative");
    if (!(energy_threshold >= 0.0 && energy_threshold < 1.0))
        throw std::invalid_argument("pursuit: energy_threshold must lie in [0, 1)");
    if (!(tie_epsilon >= 0.0)) throw std::invalid_argument("pursuit: tie_epsilon must be non-negative");
    if (refresh_interval < 0) throw std::invalid_argument("pursuit: refresh_interval must be non-negative");
    if (!(kernel_tolerance >= 0.0)) throw std::invalid_argument("pursuit: kernel_tolerance must be non-negative");
}

std::optional<Match> best_match(const CoefficientStack& stack, double tie_epsilon) {
    const auto v = stack.values();
    double best = 0.0;
    for (const auto& c : v) best = std::max(best, std::norm(c));
    if (!(best > 0.0)) return std::nullopt;
    const double floor = best * (1.0 - tie_epsilon);
    for (std::size_t i = 0; i < v.size(); ++i)
        if (std::norm(v[i]) >= floor) return Match{stack.bank().address(i), i, v[i]};
    return std::nullopt;  // unreachable
}

// ---------------------------------------------------------------------------

Pursuit::Pursuit(const Image& img, const LogGaborBank& bank, const PursuitParams& params)
    : Pursuit(img, analyze(img, bank), params) {}

Pursuit::Pursuit(const Image& img, CoefficientStack stack, const PursuitParams& params)
    : bank_(stack.bank()), params_(params), residual_(img), stack_(std::move(stack)) {
    params_.validate();
    const int n = bank_.image_size();
    if (img.width() != n || img.height() != n) throw std::invalid_argument("pursuit: image size does not match bank");
    residual_energy_ = residual_.energy();
    edges_.image_size = n;
    edges_.bank_params = bank_.params();
    edges_.initial_energy = residual_energy_;
    edges_.alpha = params_.alpha;

    std::size_t count = 0;
    for (const auto& ch : bank_.channels()) {
        const int t = (ch.grid + tile_size_ - 1) / tile_size_;
        tile_offset_.push_back(count);
        tiles_per_dim_.push_back(t);
        count += static_cast<std::size_t>(t) * t;
    }
    tiles_.resize(count);
    rebuild_tiles();
}

double Pursuit::score(std::size_t i) const {
    const double e = std::norm(stack_[i]);
    return bias_.empty() ? e : 0.5 * e + bias_[i];
}

void Pursuit::recompute_tile(int c, int tx, int ty) {
    const auto& ch = bank_.channel(c);
    const int x1 = std::min(ch.grid, (tx + 1) * tile_size_);
    const int y1 = std::min(ch.grid, (ty + 1) * tile_size_);
    Tile t;
    t.best = -std::numeric_limits<double>::infinity();
    for (int y = ty * tile_size_; y < y1; ++y) {
        const std::size_t row = ch.offset + static_cast<std::size_t>(y) * ch.grid;
        for (int x = tx * tile_size_; x < x1; ++x) {
            const double s = score(row + x);
            if (s > t.best) {
                t.best = s;
                t.index = row + x;
            }
        }
    }
    tiles_[tile_offset_[c] + static_cast<std::size_t>(ty) * tiles_per_dim_[c] + tx] = t;
}

void Pursuit::rebuild_tiles() {
    for (int c = 0; c < static_cast<int>(tile_offset_.size()); ++c)
        for (int ty = 0; ty < tiles_per_dim_[c]; ++ty)
            for (int tx = 0; tx < tiles_per_dim_[c]; ++tx) recompute_tile(c, tx, ty);
}

std::optional<std::size_t> Pursuit::select() const {
    if (tiles_.empty()) return std::nullopt;
    double best = -std::numeric_limits<double>::infinity();
    for (const auto& t : tiles_) best = std::max(best, t.best);
    if (!std::isfinite(best)) return std::nullopt;
    const double floor = best - params_.tie_epsilon * std::abs(best);
    // Tiles do not partition the index range in order, so every tile that
    // reaches the tie band is rescanned for its lowest qualifying index.
    std::optional<std::size_t> chosen;
    for (int c = 0; c < static_cast<int>(tile_offset_.size()); ++c) {
        const auto& ch = bank_.channel(c);
        const int t = tiles_per_dim_[c];
        for (int ty = 0; ty < t; ++ty)
            for (int tx = 0; tx < t; ++tx) {
                const auto& tile = tiles_[tile_offset_[c] + static_cast<std::size_t>(ty) * t + tx];
                if (tile.best < floor) continue;
                if (params_.tie_epsilon == 0.0) {
                    if (!chosen || tile.index < *chosen) chosen = tile.index;
                    continue;
                }
                const int x1 = std::min(ch.grid, (tx + 1) * tile_size_);
                const int y1 = std::min(ch.grid, (ty + 1) * tile_size_);
                for (int y = ty * tile_size_; y < y1; ++y) {
                    const std::size_t row = ch.offset + static_cast<std::size_t>(y) * ch.grid;
                    for (int x = tx * tile_size_; x < x1; ++x)
                        if (score(row + x) >= floor) {
                            if (!chosen || row + x < *chosen) chosen = row + x;
                            y = y1;  // first hit in row-major order is the tile's lowest index
                            break;
                        }
                }
            }
        if (chosen) break;  // later channels only hold larger indices
    }
    return chosen;
}

void Pursuit::invalidate(int c, int gx0, int gy0, int width, int height) {
    const auto& ch = bank_.channel(c);
    const int g = ch.grid;
    const int t = tiles_per_dim_[c];
    width = std::min(width, g);
    height = std::min(height, g);
    std::vector<char> cols(t, 0), rows(t, 0);
    for (int i = 0; i < width; ++i) cols[((gx0 + i) % g + g) % g / tile_size_] = 1;
    for (int i = 0; i < height; ++i) rows[((gy0 + i) % g + g) % g / tile_size_] = 1;
    for (int ty = 0; ty < t; ++ty)
        if (rows[ty])
            for (int tx = 0; tx < t; ++tx)
                if (cols[tx]) recompute_tile(c, tx, ty);
}

void Pursuit::enable_bias() {
    if (bias_.empty()) bias_.assign(stack_.size(), 0.0);
    rebuild_tiles();
}

void Pursuit::update_stack(int source, const Address& at, cdouble a) {
    const auto& src = bank_.channel(source);
    const auto& set = bank_.kernels(source, params_.kernel_tolerance);
    const cdouble fa = -0.5 * params_.alpha * a;
    const cdouble fb = std::conj(fa);
    for (const auto& k : set.kernels) {
        const auto& tgt = bank_.channel(k.target);
        const int g = tgt.grid;
        int phase = 0;
        if (k.phases_per_dim > 1) {
            const int px = (at.x % tgt.stride) / src.stride;
            const int py = (at.y % tgt.stride) / src.stride;
            phase = py * k.phases_per_dim + px;
        }
        const int qx = at.x / tgt.stride + k.lo;
        const int qy = at.y / tgt.stride + k.lo;
        const cdouble* kd = k.direct[phase].empty() ? nullptr : k.direct[phase].data();
        const cdouble* km = k.mirrored.empty() ? nullptr : k.mirrored[phase].data();
        auto out = stack_.channel(k.target);
        for (int my = 0; my < k.len; ++my) {
            const int gy = ((qy + my) % g + g) % g;
            cdouble* row = out.data() + static_cast<std::size_t>(gy) * g;
            const std::size_t w = static_cast<std::size_t>(my) * k.len;
            int gx = ((qx % g) + g) % g;
            for (int mx = 0; mx < k.len; ++mx) {
                cdouble delta{};
                if (kd) delta += fa * kd[w + mx];
                if (km) delta += fb * km[w + mx];
                row[gx] += delta;
                if (++gx == g) gx = 0;
            }
        }
        invalidate(k.target, qx, qy, k.len, k.len);
    }
}

std::optional<StepRecord> Pursuit::step() {
    if (exhausted_) return std::nullopt;
    const auto chosen = select();
    if (!chosen) {
        exhausted_ = true;
        return std::nullopt;
    }
    const std::size_t index = *chosen;
    const Address at = bank_.address(index);
    const int c = bank_.channel_of(index);

    // The removed projection is always exact, whatever drift the stack carries.
    const cdouble a = atom_inner_product(residual_, bank_, at);
    if (!(std::norm(a) > 0.0)) {
        exhausted_ = true;
        return std::nullopt;
    }
    StepRecord rec;
    rec.selected = a;
    rec.stack_drift = std::abs(stack_[index] - a);

    add_atom(residual_, bank_, at, -params_.alpha * a);
    residual_energy_ = residual_.energy();
    rec.residual_energy = residual_energy_;

    const int step_no = steps_taken();
    const bool refresh = params_.refresh_interval > 0 && (step_no + 1) % params_.refresh_interval == 0;
    if (refresh) {
        stack_ = analyze(residual_, bank_);
    } else {
        stack_[index] = a;  // anchor the update on the exact value
        update_stack(c, at, a);
    }

    auto it = std::lower_bound(edge_of_.begin(), edge_of_.end(), std::pair{index, std::size_t{0}});
    double before = 0.0;
    if (it != edge_of_.end() && it->first == index) {
        rec.edge = it->second;
        before = std::abs(edges_.edges[rec.edge].coeff);
        edges_.edges[rec.edge].coeff += params_.alpha * a;
    } else {
        rec.edge = edges_.edges.size();
        edges_.edges.push_back(Edge{at, bank_.channel(c).theta, params_.alpha * a, step_no});
        edge_of_.insert(it, {index, rec.edge});
    }
    edges_.steps.push_back(rec);

    if (hook_) hook_(*this, edges_.edges[rec.edge], std::abs(edges_.edges[rec.edge].coeff) - before);
    if (refresh) rebuild_tiles();
    return rec;
}

bool Pursuit::done() const {
    if (exhausted_) return true;
    if (steps_taken() >= params_.max_edges) return true;
    return residual_energy_ <= params_.energy_threshold * edges_.initial_energy;
}

void Pursuit::run() {
    while (!done())
        if (!step()) break;
}

// ---------------------------------------------------------------------------

StepResult pursue_step(const Image& img, const CoefficientStack& stack, double alpha) {
    PursuitParams p;
    p.alpha = alpha;
    p.refresh_interval = 0;
    p.kernel_tolerance = 0.0;
    p.energy_threshold = 0.0;
    // Selection follows the given stack exactly, like best_match.
    Pursuit engine(img, stack, p);
    auto rec = engine.step();
    if (!rec) throw NothingToMatch();
    return {engine.edges().edges.front(), engine.residual(), engine.stack()};
}

EdgeList extract(const Image& img, const LogGaborBank& bank, const PursuitParams& params) {
    Pursuit engine(img, bank, params);
    engine.run();
    return engine.take_edges();
}

Image reconstruct(const EdgeList& edges, const LogGaborBank& bank) {
    if (edges.image_size != bank.image_size() || !(edges.bank_params == bank.params()))
        throw std::invalid_argument("reconstruct: edge list was produced with a different filter bank");
    Image out(bank.image_size(), bank.image_size());
    for (const auto& e : edges.edges) add_atom(out, bank, e.address, e.coeff);
    return out;
}

std::vector<double> energy_curve(const EdgeList& edges, double alpha) {
    std::vector<double> curve{1.0};
    if (!(edges.initial_energy > 0.0)) return curve;
    const double gain = alpha * (2.0 - alpha);
    double e = 1.0;
    for (const auto& s : edges.steps) {
        e -= gain * std::norm(s.selected) / edges.initial_energy;
        curve.push_back(e);
    }
    return curve;
}

std::vector<double> measured_energy_curve(const EdgeList& edges) {
    std::vector<double> curve{1.0};
    if (!(edges.initial_energy > 0.0)) return curve;
    for (const auto& s : edges.steps) curve.push_back(s.residual_energy / edges.initial_energy);
    return curve;
}

// ---------------------------------------------------------------------------
// Serialization

namespace {

constexpr int kEdgeFormatVersion = 1;

json bank_to_json(const BankParams& p) {
    return {{"n_scales", p.n_scales},
            {"n_orientations", p.n_orientations},
            {"bandwidth_log_frequency", p.bandwidth_log_frequency},
            {"bandwidth_orientation", p.bandwidth_orientation},
            {"scale_ratio", p.scale_ratio},
            {"f_max", p.f_max},
            {"samples_per_wavelength", p.samples_per_wavelength},
            {"orientations", p.orientations}};
}

BankParams bank_from_json(const json& j) {
    BankParams p;
    p.n_scales = j.at("n_scales").get<int>();
    p.n_orientations = j.at("n_orientations").get<int>();
    p.bandwidth_log_frequency = j.at("bandwidth_log_frequency").get<double>();
    p.bandwidth_orientation = j.at("bandwidth_orientation").get<double>();
    p.scale_ratio = j.at("scale_ratio").get<double>();
    p.f_max = j.at("f_max").get<double>();
    p.samples_per_wavelength = j.at("samples_per_wavelength").get<double>();
    p.orientations = j.value("orientations", std::vector<double>{});
    return p;
}

}  // namespace

std::string edges_to_json(const EdgeList& edges) {
    json header = {{"version", kEdgeFormatVersion},
                   {"image_size", edges.image_size},
                   {"bank_params", bank_to_json(edges.bank_params)},
                   {"initial_energy", edges.initial_energy},
                   {"alpha", edges.alpha}};
    json list = json::array();
    for (const auto& e : edges.edges)
        list.push_back({{"x", e.address.x},
                        {"y", e.address.y},
                        {"scale", e.address.scale},
                        {"orientation", e.address.orientation},
                        {"theta", e.theta},
                        {"coeff_re", e.coeff.real()},
                        {"coeff_im", e.coeff.imag()},
                        {"step", e.step}});
    json trace = json::array();
    for (const auto& s : edges.steps)
        trace.push_back({s.edge, s.selected.real(), s.selected.imag(), s.residual_energy, s.stack_drift});
    return json{{"header", header}, {"edges", list}, {"trace", trace}}.dump();
}

EdgeList edges_from_json(const std::string& text) {
    EdgeList out;
    try {
        const auto j = json::parse(text);
        const auto& h = j.at("header");
        const int version = h.at("version").get<int>();
        if (version != kEdgeFormatVersion)
            throw std::runtime_error("edge list: unsupported format version " + std::to_string(version));
        out.image_size = h.at("image_size").get<int>();
        out.bank_params = bank_from_json(h.at("bank_params"));
        out.initial_energy = h.at("initial_energy").get<double>();
        out.alpha = h.value("alpha", 1.0);
        for (const auto& e : j.at("edges")) {
            Edge edge;
            edge.address = {e.at("scale").get<int>(), e.at("orientation").get<int>(), e.at("x").get<int>(),
                            e.at("y").get<int>()};
            edge.theta = e.at("theta").get<double>();
            edge.coeff = {e.at("coeff_re").get<double>(), e.at("coeff_im").get<double>()};
            edge.step = e.at("step").get<int>();
            out.edges.push_back(edge);
        }
        for (const auto& s : j.value("trace", json::array())) {
            StepRecord r;
            r.edge = s.at(0).get<std::size_t>();
            r.selected = {s.at(1).get<double>(), s.at(2).get<double>()};
            r.residual_energy = s.at(3).get<double>();
            r.stack_drift = s.at(4).get<double>();
            if (r.edge >= out.edges.size()) throw std::runtime_error("edge list: trace refers to a missing edge");
            out.steps.push_back(r);
        }
    } catch (const json::exception& e) {
        throw std::runtime_error(std::string("edge list: malformed JSON: ") + e.what());
    }
    return out;
}

void save_edges(const std::filesystem::path& path, const EdgeList& edges) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot write " + path.string());
    f << edges_to_json(edges) << '\n';
    if (!f) throw std::runtime_error("write failed: " + path.string());
}

EdgeList load_edges(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot read " + path.string());
    std::stringstream ss;
    ss << f.rdbuf();
    return edges_from_json(ss.str());
}

}  // namespace sparselets
