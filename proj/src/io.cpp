#include "expstop/io.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>
#include <tuple>

#include "json.hpp"

namespace expstop {

namespace fs = std::filesystem;
using nlohmann::json;

std::string format_number(double x) {
    if (std::isnan(x)) return "nan";
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    std::array<char, 32> buf{};
    const auto result = std::to_chars(buf.data(), buf.data() + buf.size(), x);
    return std::string(buf.data(), result.ptr);
}

namespace {

class Fnv1a {
public:
    void bytes(const void* data, std::size_t n) {
        const auto* p = static_cast<const unsigned char*>(data);
        for (std::size_t i = 0; i < n; ++i) {
            state_ ^= p[i];
            state_ *= 0x100000001b3ULL;
        }
    }
    void number(double x) { word(std::bit_cast<std::uint64_t>(x)); }
    void word(std::uint64_t x) {
        std::array<unsigned char, 8> b{};
        for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(x >> (8 * i));
        bytes(b.data(), b.size());
    }
    std::uint64_t value() const { return state_; }

private:
    std::uint64_t state_ = 0xcbf29ce484222325ULL;
};

}  // namespace

std::uint64_t field_hash(const ModelParams& m, const Grid& g, const SolverOptions& o) {
    Fnv1a h;
    for (double x : {m.theta, m.pbar, m.sigma, m.rho, m.gamma, m.iota, m.psi, m.ref_r, m.varpi, m.k_loss, m.cap_m,
                     m.eta}) {
        h.number(x);
    }
    for (double x : {g.p_min, g.p_max, g.b_min, g.b_max, g.h}) h.number(x);
    h.word(g.n_p);
    h.word(g.n_b);
    h.number(o.tol);
    h.word(static_cast<std::uint64_t>(o.max_iter));
    h.number(o.damping);
    h.word(static_cast<std::uint64_t>(o.neumann));
    return h.value();
}

std::string hex64(std::uint64_t x) {
    std::array<char, 17> buf{};
    const auto r = std::to_chars(buf.data(), buf.data() + 16, x, 16);
    std::string s(buf.data(), r.ptr);
    return std::string(16 - s.size(), '0') + s;
}

void write_text(const fs::path& file, const std::string& contents) {
    std::error_code ec;
    if (file.has_parent_path()) fs::create_directories(file.parent_path(), ec);
    const fs::path tmp = file.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot write '" + file.string() + "'");
        out << contents;
        if (!out) throw IoError("write failed for '" + file.string() + "'");
    }
    fs::rename(tmp, file, ec);
    if (ec) throw IoError("cannot move '" + tmp.string() + "' into place: " + ec.message());
}

std::string read_text(const fs::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw IoError("cannot read '" + file.string() + "'");
    std::stringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

void write_field_csv(const fs::path& dir, const ValueField& field) {
    const Grid& g = field.grid;
    std::string v0 = "p,value\n";
    for (std::size_t i = 0; i < g.n_p; ++i) v0 += format_number(g.p(i)) + "," + format_number(field.v0[i]) + "\n";
    write_text(dir / "v0.csv", v0);

    std::string v1 = "p,b,value\n";
    v1.reserve(g.n_p * g.n_b * 24);
    for (std::size_t i = 0; i < g.n_p; ++i) {
        for (std::size_t j = 0; j < g.n_b; ++j) {
            v1 += format_number(g.p(i));
            v1 += ',';
            v1 += format_number(g.b(j));
            v1 += ',';
            v1 += format_number(field.v1_at(i, j));
            v1 += '\n';
        }
    }
    write_text(dir / "v1.csv", v1);

    const auto exit = free_boundary_exit(advantage_exit(field.v1, g, field.params), g);
    std::string ex = "b,p_star\n";
    for (std::size_t j = 0; j < g.n_b; ++j) {
        ex += format_number(g.b(j)) + "," + (exit.p_star[j] ? format_number(*exit.p_star[j]) : "") + "\n";
    }
    write_text(dir / "boundary_exit.csv", ex);

    const auto entry = free_boundary_entry(advantage_entry(field.v0, field.v1_diagonal()), g);
    std::string en = "p_dagger,multiple_crossings\n";
    en += (entry.p_dagger ? format_number(*entry.p_dagger) : "") + "," + (entry.multiple_crossings ? "1" : "0") + "\n";
    write_text(dir / "boundary_entry.csv", en);
}

namespace {

constexpr char kMagic[8] = {'E', 'X', 'S', 'T', 'F', 'L', 'D', '1'};

template <class T>
void put(std::ofstream& out, const T& value) {
    out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <class T>
T take(std::ifstream& in, const fs::path& file) {
    T value{};
    in.read(reinterpret_cast<char*>(&value), sizeof(T));
    if (!in) throw IoError("truncated cache file '" + file.string() + "'");
    return value;
}

void put_diag(std::ofstream& out, const SolveDiagnostics& d) {
    put<std::uint8_t>(out, d.converged ? 1 : 0);
    put<std::int32_t>(out, d.iterations);
    put(out, d.final_change);
    put(out, d.residual);
    put<std::uint64_t>(out, d.upwind_nodes);
}

SolveDiagnostics take_diag(std::ifstream& in, const fs::path& file) {
    SolveDiagnostics d;
    d.converged = take<std::uint8_t>(in, file) != 0;
    d.iterations = take<std::int32_t>(in, file);
    d.final_change = take<double>(in, file);
    d.residual = take<double>(in, file);
    d.upwind_nodes = take<std::uint64_t>(in, file);
    return d;
}

}  // namespace

void write_field_cache(const fs::path& file, const ValueField& field) {
    std::error_code ec;
    if (file.has_parent_path()) fs::create_directories(file.parent_path(), ec);
    const fs::path tmp = file.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot write cache '" + file.string() + "'");
        out.write(kMagic, sizeof kMagic);
        put<std::uint64_t>(out, field.grid.n_p);
        put<std::uint64_t>(out, field.grid.n_b);
        out.write(reinterpret_cast<const char*>(field.v0.data()), static_cast<std::streamsize>(field.v0.size() * 8));
        out.write(reinterpret_cast<const char*>(field.v1.data()), static_cast<std::streamsize>(field.v1.size() * 8));
        put_diag(out, field.v1_diag);
        put_diag(out, field.v0_diag);
        if (!out) throw IoError("write failed for cache '" + file.string() + "'");
    }
    fs::rename(tmp, file, ec);
    if (ec) throw IoError("cannot move cache into place: " + ec.message());
}

std::optional<ValueField> read_field_cache(const fs::path& file, const ModelParams& params, const Grid& grid) {
    if (!fs::exists(file)) return std::nullopt;
    std::ifstream in(file, std::ios::binary);
    if (!in) throw IoError("cannot read cache '" + file.string() + "'");
    char magic[sizeof kMagic];
    in.read(magic, sizeof magic);
    if (!in || std::memcmp(magic, kMagic, sizeof kMagic) != 0) throw IoError("not a field cache: " + file.string());
    const auto n_p = take<std::uint64_t>(in, file);
    const auto n_b = take<std::uint64_t>(in, file);
    if (n_p != grid.n_p || n_b != grid.n_b) throw IoError("cache grid mismatch: " + file.string());
    ValueField field;
    field.grid = grid;
    field.params = params;
    field.v0.resize(n_p);
    field.v1.resize(n_p * n_b);
    in.read(reinterpret_cast<char*>(field.v0.data()), static_cast<std::streamsize>(n_p * 8));
    in.read(reinterpret_cast<char*>(field.v1.data()), static_cast<std::streamsize>(n_p * n_b * 8));
    if (!in) throw IoError("truncated cache file '" + file.string() + "'");
    field.v1_diag = take_diag(in, file);
    field.v0_diag = take_diag(in, file);
    return field;
}

namespace {

std::vector<std::string> split(const std::string& line, char sep) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream s(line);
    while (std::getline(s, cell, sep)) out.push_back(cell);
    if (!line.empty() && line.back() == sep) out.emplace_back();
    return out;
}

}  // namespace

void upsert_ledger(const fs::path& file, const std::vector<LedgerRow>& rows) {
    static const std::string header = "experiment,params_hash,estimate,std_error,n_paths,dt,seed";
    using Key = std::tuple<std::string, std::string, std::string, std::string, std::string>;
    std::vector<std::pair<Key, std::string>> lines;

    if (fs::exists(file)) {
        std::istringstream in(read_text(file));
        std::string line;
        std::getline(in, line);
        if (line != header) throw IoError("results ledger has an unexpected header: " + file.string());
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            const auto c = split(line, ',');
            if (c.size() != 7) throw IoError("malformed results ledger row: " + line);
            lines.push_back({Key{c[0], c[1], c[4], c[5], c[6]}, line});
        }
    }
    for (const auto& r : rows) {
        const std::string n = std::to_string(r.n_paths);
        const std::string dt = format_number(r.dt);
        const std::string seed = std::to_string(r.seed);
        const std::string line = r.experiment + "," + r.params_hash + "," + format_number(r.estimate) + "," +
                                 format_number(r.std_error) + "," + n + "," + dt + "," + seed;
        const Key key{r.experiment, r.params_hash, n, dt, seed};
        auto it = std::find_if(lines.begin(), lines.end(), [&](const auto& l) { return l.first == key; });
        if (it != lines.end()) {
            it->second = line;
        } else {
            lines.push_back({key, line});
        }
    }
    std::string out = header + "\n";
    for (const auto& l : lines) out += l.second + "\n";
    write_text(file, out);
}

void write_signal_paths(const fs::path& file, const SignalPaths& paths) {
    std::string out = "path_id,step,p\n";
    for (std::size_t i = 0; i < paths.p.size(); ++i) {
        for (std::size_t l = 0; l < paths.p[i].size(); ++l) {
            out += std::to_string(i) + "," + std::to_string(l) + "," + format_number(paths.p[i][l]) + "\n";
        }
    }
    write_text(file, out);
}

SignalPaths read_signal_paths(const fs::path& file, double dt) {
    std::istringstream in(read_text(file));
    std::string line;
    std::getline(in, line);
    if (line.rfind("path_id,step,p", 0) != 0) throw IoError("signal path CSV needs header path_id,step,p");
    std::map<long long, std::map<long long, double>> rows;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line == "\r") continue;
        const auto c = split(line, ',');
        try {
            if (c.size() < 3) throw std::invalid_argument("columns");
            rows[std::stoll(c[0])][std::stoll(c[1])] = std::stod(c[2]);
        } catch (const std::exception&) {
            throw IoError("bad signal path row " + std::to_string(line_no) + " in " + file.string());
        }
    }
    SignalPaths out;
    out.dt = dt;
    std::size_t length = 0;
    for (const auto& [id, steps] : rows) {
        std::vector<double> path;
        long long expect = 0;
        for (const auto& [step, p] : steps) {
            if (step != expect++) throw IoError("signal path " + std::to_string(id) + " has a gap in steps");
            path.push_back(p);
        }
        if (length == 0) length = path.size();
        if (path.size() != length) throw IoError("signal paths must all have the same length");
        out.p.push_back(std::move(path));
    }
    if (out.p.empty()) throw IoError("no signal paths in " + file.string());
    return out;
}

std::string net_to_json(const ValueNet& net, const std::string& config_json, std::uint64_t seed) {
    json j;
    j["architecture"] = {{"layers", 2}, {"input_dim", net.input_dim()}, {"hidden", ValueNet::hidden},
                         {"activation", "relu"}};
    j["normalization"] = {{"input_scale", net.input_scale()}};
    j["parameters"] = std::vector<double>(net.parameters().begin(), net.parameters().end());
    j["config"] = config_json.empty() ? json::object() : json::parse(config_json);
    j["seed"] = seed;
    return j.dump(1);
}

ValueNet net_from_json(const std::string& text) {
    try {
        const json j = json::parse(text);
        const auto& a = j.at("architecture");
        if (a.at("layers").get<int>() != 2 || a.at("hidden").get<std::size_t>() != ValueNet::hidden ||
            a.at("activation").get<std::string>() != "relu") {
            throw IoError("checkpoint architecture differs from the 2-layer, 32-unit ReLU net");
        }
        ValueNet net(a.at("input_dim").get<std::size_t>(), j.at("normalization").at("input_scale").get<double>());
        net.set_parameters(j.at("parameters").get<std::vector<double>>());
        if (!net.finite()) throw IoError("checkpoint has non-finite parameters");
        return net;
    } catch (const json::exception& e) {
        throw IoError(std::string("bad checkpoint: ") + e.what());
    } catch (const std::invalid_argument& e) {
        throw IoError(std::string("bad checkpoint: ") + e.what());
    }
}

}  // namespace expstop
