#include "dhtm/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <sstream>

namespace dhtm {

namespace {

constexpr char kMagic[8] = {'D', 'H', 'T', 'M', 'C', 'K', 'P', 'T'};

void put_u32(std::ostream& os, std::uint32_t v) {
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    os.write(reinterpret_cast<const char*>(b), 4);
}

void put_i32(std::ostream& os, std::int32_t v) { put_u32(os, static_cast<std::uint32_t>(v)); }

void put_u64(std::ostream& os, std::uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    os.write(reinterpret_cast<const char*>(b), 8);
}

void put_f64(std::ostream& os, double v) {
    std::uint64_t bits;
    static_assert(sizeof(bits) == sizeof(v));
    std::memcpy(&bits, &v, sizeof(bits));
    put_u64(os, bits);
}

std::uint32_t get_u32(std::istream& is) {
    unsigned char b[4];
    if (!is.read(reinterpret_cast<char*>(b), 4)) throw CheckpointError("checkpoint: truncated");
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
    return v;
}

std::int32_t get_i32(std::istream& is) { return static_cast<std::int32_t>(get_u32(is)); }

std::uint64_t get_u64(std::istream& is) {
    unsigned char b[8];
    if (!is.read(reinterpret_cast<char*>(b), 8)) throw CheckpointError("checkpoint: truncated");
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return v;
}

double get_f64(std::istream& is) {
    const std::uint64_t bits = get_u64(is);
    double v;
    std::memcpy(&v, &bits, sizeof(v));
    return v;
}

void put_string(std::ostream& os, const std::string& s) {
    put_u64(os, s.size());
    os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string get_string(std::istream& is) {
    const std::uint64_t n = get_u64(is);
    if (n > (1ull << 30)) throw CheckpointError("checkpoint: unreasonable string length");
    std::string s(n, '\0');
    if (n && !is.read(s.data(), static_cast<std::streamsize>(n)))
        throw CheckpointError("checkpoint: truncated");
    return s;
}

void put_f64_vec(std::ostream& os, const std::vector<double>& v) {
    put_u64(os, v.size());
    for (double x : v) put_f64(os, x);
}

std::vector<double> get_f64_vec(std::istream& is) {
    const std::uint64_t n = get_u64(is);
    if (n > (1ull << 28)) throw CheckpointError("checkpoint: unreasonable vector length");
    std::vector<double> v(n);
    for (auto& x : v) x = get_f64(is);
    return v;
}

void put_i32_vec(std::ostream& os, const std::vector<int>& v) {
    put_u64(os, v.size());
    for (int x : v) put_i32(os, x);
}

std::vector<int> get_i32_vec(std::istream& is) {
    const std::uint64_t n = get_u64(is);
    if (n > (1ull << 28)) throw CheckpointError("checkpoint: unreasonable vector length");
    std::vector<int> v(n);
    for (auto& x : v) x = get_i32(is);
    return v;
}

void put_rng(std::ostream& os, const Rng& rng) {
    std::ostringstream ss;
    rng.save(ss);
    put_string(os, ss.str());
}

Rng get_rng(std::istream& is) {
    std::istringstream ss(get_string(is));
    Rng rng;
    rng.load(ss);
    return rng;
}

}  // namespace

void save_checkpoint(std::ostream& os, const TrialCheckpoint& c) {
    os.write(kMagic, sizeof(kMagic));
    put_u32(os, kCheckpointVersion);

    // encoder
    put_i32(os, c.encoder_neurons);
    put_i32(os, c.encoder_input_dim);
    put_u64(os, c.encoder.rf.size());
    for (std::size_t i = 0; i < c.encoder.rf.size(); ++i) {
        put_i32_vec(os, c.encoder.rf[i]);
        put_f64_vec(os, c.encoder.w[i]);
    }
    put_f64_vec(os, c.encoder.rate);
    put_f64(os, c.encoder.scale);
    put_i32(os, c.encoder.steps_remaining);
    put_i32(os, c.encoder.stage);
    put_rng(os, c.encoder.rng);

    // memory
    put_i32(os, c.topology.n_vars);
    put_i32(os, c.topology.n_obs_states);
    put_i32(os, c.topology.cells_per_column);
    put_i32(os, c.topology.n_action_states);
    put_u64(os, c.memory.slots.size());
    for (const auto& seg : c.memory.slots) {
        put_i32(os, seg.owner);
        put_f64(os, seg.f);
        put_i32_vec(os, seg.field);
        put_f64_vec(os, seg.w);
    }
    put_i32_vec(os, c.memory.free_ids);
    put_u64(os, c.memory.segs_by_cell.size());
    for (const auto& ids : c.memory.segs_by_cell) put_i32_vec(os, ids);
    put_u64(os, c.memory.reverse.size());
    for (const auto& ids : c.memory.reverse) put_i32_vec(os, ids);
    put_u64(os, c.memory.messages.p.size());
    for (const auto& dist : c.memory.messages.p) put_f64_vec(os, dist);
    put_i32(os, c.memory.context_valid ? 1 : 0);
    put_rng(os, c.memory.rng);

    // successor representation
    put_i32(os, c.sr_rows);
    put_i32(os, c.sr_cols);
    put_f64(os, c.sr_gamma);
    put_i32(os, c.sr_horizon);
    put_f64_vec(os, c.sr_data);

    // reward model
    put_f64_vec(os, c.reward_r);

    // random streams and environment state
    put_rng(os, c.policy_rng);
    put_rng(os, c.env_rng);
    put_f64(os, c.env_state.x);
    put_f64(os, c.env_state.y);
    put_f64(os, c.env_state.vx);
    put_f64(os, c.env_state.vy);
    put_i32(os, c.env_state.steps);
    put_i32(os, c.env_state.terminal ? 1 : 0);
    put_u64(os, c.env_inside.size());
    for (std::uint8_t b : c.env_inside) os.put(static_cast<char>(b));

    if (!os) throw CheckpointError("checkpoint: write failed");
}

TrialCheckpoint load_checkpoint(std::istream& is) {
    char magic[8];
    if (!is.read(magic, sizeof(magic)) || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
        throw CheckpointError("checkpoint: bad magic");
    const std::uint32_t version = get_u32(is);
    if (version != kCheckpointVersion)
        throw CheckpointError("checkpoint: unsupported version " + std::to_string(version));

    TrialCheckpoint c;
    c.encoder_neurons = get_i32(is);
    c.encoder_input_dim = get_i32(is);
    const std::uint64_t n_neurons = get_u64(is);
    if (n_neurons != static_cast<std::uint64_t>(c.encoder_neurons))
        throw CheckpointError("checkpoint: encoder size mismatch");
    c.encoder.rf.resize(n_neurons);
    c.encoder.w.resize(n_neurons);
    for (std::uint64_t i = 0; i < n_neurons; ++i) {
        c.encoder.rf[i] = get_i32_vec(is);
        c.encoder.w[i] = get_f64_vec(is);
        if (c.encoder.rf[i].size() != c.encoder.w[i].size())
            throw CheckpointError("checkpoint: encoder row mismatch");
    }
    c.encoder.rate = get_f64_vec(is);
    c.encoder.scale = get_f64(is);
    c.encoder.steps_remaining = get_i32(is);
    c.encoder.stage = get_i32(is);
    c.encoder.rng = get_rng(is);

    c.topology.n_vars = get_i32(is);
    c.topology.n_obs_states = get_i32(is);
    c.topology.cells_per_column = get_i32(is);
    c.topology.n_action_states = get_i32(is);
    const std::uint64_t n_slots = get_u64(is);
    if (n_slots > (1ull << 26)) throw CheckpointError("checkpoint: unreasonable segment count");
    c.memory.slots.resize(n_slots);
    for (auto& seg : c.memory.slots) {
        seg.owner = get_i32(is);
        seg.f = get_f64(is);
        seg.field = get_i32_vec(is);
        seg.w = get_f64_vec(is);
        if (seg.field.size() != seg.w.size())
            throw CheckpointError("checkpoint: segment field mismatch");
    }
    c.memory.free_ids = get_i32_vec(is);
    c.memory.segs_by_cell.resize(get_u64(is));
    for (auto& ids : c.memory.segs_by_cell) ids = get_i32_vec(is);
    c.memory.reverse.resize(get_u64(is));
    for (auto& ids : c.memory.reverse) ids = get_i32_vec(is);
    c.memory.messages.p.resize(get_u64(is));
    for (auto& dist : c.memory.messages.p) dist = get_f64_vec(is);
    c.memory.context_valid = get_i32(is) != 0;
    c.memory.rng = get_rng(is);

    c.sr_rows = get_i32(is);
    c.sr_cols = get_i32(is);
    c.sr_gamma = get_f64(is);
    c.sr_horizon = get_i32(is);
    c.sr_data = get_f64_vec(is);
    if (c.sr_data.size() != static_cast<std::size_t>(c.sr_rows) * c.sr_cols)
        throw CheckpointError("checkpoint: SR size mismatch");

    c.reward_r = get_f64_vec(is);

    c.policy_rng = get_rng(is);
    c.env_rng = get_rng(is);
    c.env_state.x = get_f64(is);
    c.env_state.y = get_f64(is);
    c.env_state.vx = get_f64(is);
    c.env_state.vy = get_f64(is);
    c.env_state.steps = get_i32(is);
    c.env_state.terminal = get_i32(is) != 0;
    c.env_inside.resize(get_u64(is));
    for (auto& b : c.env_inside) {
        const int ch = is.get();
        if (ch == EOF) throw CheckpointError("checkpoint: truncated");
        b = static_cast<std::uint8_t>(ch);
    }
    return c;
}

void save_checkpoint_file(const std::string& path, const TrialCheckpoint& ckpt) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw CheckpointError("checkpoint: cannot open for writing: " + path);
    save_checkpoint(os, ckpt);
}

TrialCheckpoint load_checkpoint_file(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw CheckpointError("checkpoint: cannot open: " + path);
    return load_checkpoint(is);
}

}  // namespace dhtm
