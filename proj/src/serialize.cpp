#include "selfact/serialize.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "selfact/errors.hpp"
#include "selfact/rng.hpp"

namespace selfact {

namespace {

constexpr const char* kMagic = "selfact-params v1";

std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

[[noreturn]] void bad_line(std::size_t line_no, const std::string& what) {
    throw DataError("container line " + std::to_string(line_no) + ": " + what);
}

}  // namespace

const ParamContainer::Tensor* ParamContainer::find(const std::string& name) const {
    for (const auto& t : tensors) {
        if (t.name == name) return &t;
    }
    return nullptr;
}

std::string container_to_string(const ParamContainer& c) {
    std::ostringstream out;
    out << kMagic << '\n';
    for (const auto& [k, v] : c.meta) out << "meta " << k << ' ' << v << '\n';
    if (!c.labels.empty()) {
        out << "labels " << c.labels.size() << '\n';
        for (const auto& l : c.labels) out << l << '\n';
    }
    for (const auto& t : c.tensors) {
        out << "tensor " << t.name << ' ' << t.dims.size();
        for (std::size_t d : t.dims) out << ' ' << d;
        out << '\n';
        for (std::size_t i = 0; i < t.values.size(); ++i) {
            if (i) out << ' ';
            out << fmt_double(t.values[i]);
        }
        out << '\n';
    }
    out << "end\n";
    return out.str();
}

ParamContainer container_from_string(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    auto next_line = [&](bool required) -> bool {
        if (!std::getline(in, line)) {
            if (required) throw DataError("container truncated at line " + std::to_string(line_no));
            return false;
        }
        ++line_no;
        return true;
    };

    next_line(true);
    if (line != kMagic) bad_line(line_no, "unsupported container format (want '" + std::string(kMagic) + "')");

    ParamContainer c;
    bool seen_end = false;
    while (next_line(false)) {
        std::istringstream ls(line);
        std::string tok;
        ls >> tok;
        if (tok == "end") {
            seen_end = true;
            break;
        }
        if (tok == "meta") {
            std::string key;
            if (!(ls >> key)) bad_line(line_no, "meta without a key");
            std::string value;
            std::getline(ls, value);
            if (!value.empty() && value.front() == ' ') value.erase(0, 1);
            if (!c.meta.emplace(key, value).second) bad_line(line_no, "duplicate meta key '" + key + "'");
        } else if (tok == "labels") {
            std::size_t n = 0;
            if (!(ls >> n)) bad_line(line_no, "labels without a count");
            if (!c.labels.empty()) bad_line(line_no, "second labels section");
            for (std::size_t i = 0; i < n; ++i) {
                next_line(true);
                c.labels.push_back(line);
            }
        } else if (tok == "tensor") {
            ParamContainer::Tensor t;
            std::size_t rank = 0;
            if (!(ls >> t.name >> rank)) bad_line(line_no, "tensor needs a name and a rank");
            std::size_t count = 1;
            for (std::size_t i = 0; i < rank; ++i) {
                std::size_t d = 0;
                if (!(ls >> d)) bad_line(line_no, "tensor '" + t.name + "' is missing dimensions");
                t.dims.push_back(d);
                count *= d;
            }
            if (c.find(t.name)) bad_line(line_no, "duplicate tensor '" + t.name + "'");
            next_line(true);
            std::istringstream vs(line);
            t.values.reserve(count);
            double v;
            while (vs >> v) t.values.push_back(v);
            if (!vs.eof()) bad_line(line_no, "tensor '" + t.name + "': unparseable value");
            if (t.values.size() != count) {
                bad_line(line_no, "tensor '" + t.name + "' has " + std::to_string(t.values.size()) +
                                      " values, header promises " + std::to_string(count));
            }
            c.tensors.push_back(std::move(t));
        } else {
            bad_line(line_no, "unknown directive '" + tok + "'");
        }
    }
    if (!seen_end) throw DataError("container truncated: no 'end' line");
    return c;
}

void save_container(const ParamContainer& c, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write '" + path + "'");
    out << container_to_string(c);
    out.flush();
    if (!out) throw DataError("write failed for '" + path + "'");
}

ParamContainer load_container(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot read '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return container_from_string(buf.str());
}

std::uint64_t container_hash(const ParamContainer& c) {
    return fnv1a64(container_to_string(c));
}

// ============================================================================
// Typed wrappers
// ============================================================================

namespace {

void require_kind(const ParamContainer& c, const std::string& kind) {
    auto it = c.meta.find("kind");
    if (it == c.meta.end() || it->second != kind) {
        throw DataError("container is not a " + kind + " (kind=" +
                        (it == c.meta.end() ? std::string("<missing>") : it->second) + ")");
    }
}

void copy_into(const ParamContainer& c, const std::string& name, std::vector<double>& dst,
               const std::string& kind) {
    const auto* t = c.find(name);
    if (!t) throw DataError(kind + " load: tensor '" + name + "' is missing");
    if (t->values.size() != dst.size()) {
        throw DataError(kind + " load: tensor '" + name + "' has " +
                        std::to_string(t->values.size()) + " values, architecture expects " +
                        std::to_string(dst.size()));
    }
    dst = t->values;
}

ParamContainer::Tensor mat_tensor(const std::string& name, const nn::Mat& m) {
    return {name, {m.rows, m.cols}, m.v};
}

ParamContainer::Tensor vec_tensor(const std::string& name, const std::vector<double>& v) {
    return {name, {v.size()}, v};
}

}  // namespace

ParamContainer to_container(const EncoderModel& model) {
    ParamContainer c;
    c.meta["kind"] = "encoder";
    c.meta["dropout_rate"] = fmt_double(model.dropout_rate);
    c.tensors.push_back(mat_tensor("conv1.w", model.conv1.w));
    c.tensors.push_back(vec_tensor("conv1.b", model.conv1.b));
    c.tensors.push_back(mat_tensor("conv2.w", model.conv2.w));
    c.tensors.push_back(vec_tensor("conv2.b", model.conv2.b));
    c.tensors.push_back(mat_tensor("conv3.w", model.conv3.w));
    c.tensors.push_back(vec_tensor("conv3.b", model.conv3.b));
    return c;
}

void encoder_from_container(const ParamContainer& c, EncoderModel& model) {
    require_kind(c, "encoder");
    copy_into(c, "conv1.w", model.conv1.w.v, "encoder");
    copy_into(c, "conv1.b", model.conv1.b, "encoder");
    copy_into(c, "conv2.w", model.conv2.w.v, "encoder");
    copy_into(c, "conv2.b", model.conv2.b, "encoder");
    copy_into(c, "conv3.w", model.conv3.w.v, "encoder");
    copy_into(c, "conv3.b", model.conv3.b, "encoder");
    if (auto it = c.meta.find("dropout_rate"); it != c.meta.end()) {
        model.dropout_rate = std::stod(it->second);
    }
}

ParamContainer to_container(const ReducerModel& model) {
    ParamContainer c;
    c.meta["kind"] = "reducer";
    c.meta["input_dim"] = std::to_string(model.input_dim);
    c.meta["out_dim"] = std::to_string(model.out_dim);
    c.tensors.push_back(vec_tensor("mean", model.mean));
    c.tensors.push_back(mat_tensor("components", model.components));
    c.tensors.push_back(vec_tensor("eigenvalues", model.eigenvalues));
    return c;
}

ReducerModel reducer_from_container(const ParamContainer& c) {
    require_kind(c, "reducer");
    ReducerModel m;
    auto meta_size = [&](const char* key) {
        auto it = c.meta.find(key);
        if (it == c.meta.end()) throw DataError("reducer load: meta '" + std::string(key) + "' is missing");
        return static_cast<std::size_t>(std::stoull(it->second));
    };
    m.input_dim = meta_size("input_dim");
    m.out_dim = meta_size("out_dim");
    m.mean.resize(m.input_dim);
    m.components = nn::Mat(m.input_dim, m.out_dim);
    m.eigenvalues.resize(m.out_dim);
    copy_into(c, "mean", m.mean, "reducer");
    copy_into(c, "components", m.components.v, "reducer");
    copy_into(c, "eigenvalues", m.eigenvalues, "reducer");
    return m;
}

}  // namespace selfact
