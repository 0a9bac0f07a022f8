#include "fbcontrol/io.hpp"

#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "json.hpp"

#include "fbcontrol/errors.hpp"
#include "fbcontrol/version.hpp"

namespace fbcontrol {

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

namespace {

std::ofstream open_out(const std::string& path, bool binary = false) {
  std::ofstream out(path, binary ? std::ios::binary : std::ios::out);
  if (!out) throw IoError("cannot open for writing: " + path);
  return out;
}

void finish(std::ofstream& out, const std::string& path) {
  out.flush();
  if (!out) throw IoError("short write: " + path);
}

}  // namespace

void write_value_field_csv(const std::string& path, const ValueField& field,
                           const Scenario& sc) {
  std::ofstream out = open_out(path);
  out << "t,x,w,wx,wxx,u_star,v\n";
  for (int i = 0; i < field.nt; ++i) {
    for (int j = 0; j < field.nx; ++j) {
      const std::size_t idx = field.index(i, j);
      const double u_star = sc.controls.points[static_cast<std::size_t>(field.u_index[idx])];
      out << format_double(field.time_at(i)) << ',' << format_double(field.x_at(j)) << ','
          << format_double(field.w[idx]) << ',' << format_double(field.wx[idx]) << ','
          << format_double(field.wxx[idx]) << ',' << format_double(u_star) << ','
          << format_double(field.v[idx]) << '\n';
    }
  }
  finish(out, path);
}

void write_trajectories_csv(const std::string& path, const TrajectoryBundle& bundle) {
  std::ofstream out = open_out(path);
  out << "path_id,t,x,y,z,u\n";
  for (int p = 0; p < bundle.paths; ++p) {
    for (int k = 0; k < bundle.nodes; ++k) {
      const std::size_t i = bundle.at(p, k);
      out << p << ',' << format_double(bundle.t0 + bundle.dt * k) << ','
          << format_double(bundle.x[i]) << ',' << format_double(bundle.y[i]) << ','
          << format_double(bundle.z[i]) << ',' << format_double(bundle.u[i]) << '\n';
    }
  }
  finish(out, path);
}

void write_trajectories_bin(const std::string& path, const TrajectoryBundle& bundle) {
  std::ofstream out = open_out(path, /*binary=*/true);
  const char magic[4] = {'F', 'B', 'T', 'B'};
  out.write(magic, 4);
  auto put_u32 = [&](std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                          static_cast<unsigned char>((v >> 8) & 0xff),
                          static_cast<unsigned char>((v >> 16) & 0xff),
                          static_cast<unsigned char>((v >> 24) & 0xff)};
    out.write(reinterpret_cast<const char*>(b), 4);
  };
  auto put_f64 = [&](double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((bits >> (8 * i)) & 0xff);
    out.write(reinterpret_cast<const char*>(b), 8);
  };
  put_u32(1);
  put_u32(static_cast<std::uint32_t>(bundle.paths));
  put_u32(static_cast<std::uint32_t>(bundle.nodes));
  put_f64(bundle.t0);
  put_f64(bundle.T);
  for (double v : bundle.x) put_f64(v);
  for (double v : bundle.y) put_f64(v);
  for (double v : bundle.z) put_f64(v);
  for (double v : bundle.u) put_f64(v);
  for (double v : bundle.dw) put_f64(v);
  finish(out, path);
}

void write_adjoints_csv(const std::string& path, const TrajectoryBundle& bundle,
                        const AdjointBundle& adj) {
  std::ofstream out = open_out(path);
  out << "path_id,t,p,q,P,Q,K1,K2\n";
  for (int p = 0; p < adj.paths; ++p) {
    for (int k = 0; k < adj.nodes; ++k) {
      const std::size_t i = adj.at(p, k);
      out << p << ',' << format_double(bundle.t0 + bundle.dt * k) << ','
          << format_double(adj.p[i]) << ',' << format_double(adj.q[i]) << ','
          << format_double(adj.big_p[i]) << ',' << format_double(adj.big_q[i]) << ','
          << format_double(adj.k1v[i]) << ',' << format_double(adj.k2v[i]) << '\n';
    }
  }
  finish(out, path);
}

void write_local_adjoints_csv(const std::string& path, const TrajectoryBundle& bundle,
                              const LocalAdjointBundle& local) {
  std::ofstream out = open_out(path);
  out << "path_id,t,h,m,n\n";
  for (int p = 0; p < local.paths; ++p) {
    for (int k = 0; k < local.nodes; ++k) {
      const std::size_t i = local.at(p, k);
      out << p << ',' << format_double(bundle.t0 + bundle.dt * k) << ','
          << format_double(local.h[i]) << ',' << format_double(local.m[i]) << ','
          << format_double(local.n[i]) << '\n';
    }
  }
  finish(out, path);
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out = open_out(path);
  out << content;
  finish(out, path);
}

std::uint64_t fnv1a64(const void* data, std::size_t n) {
  const unsigned char* p = static_cast<const unsigned char*>(data);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t fnv1a64_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open for hashing: " + path);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  char buf[1 << 16];
  while (in) {
    in.read(buf, sizeof(buf));
    const std::streamsize got = in.gcount();
    for (std::streamsize i = 0; i < got; ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 0x100000001b3ULL;
    }
  }
  return h;
}

void write_run_manifest(const std::string& path, const RunManifest& manifest) {
  nlohmann::json stages = nlohmann::json::array();
  for (const auto& s : manifest.stages) stages.push_back({{"name", s.name}, {"wall_ms", s.wall_ms}});
  char hash_hex[32];
  std::snprintf(hash_hex, sizeof(hash_hex), "%016llx",
                static_cast<unsigned long long>(manifest.scenario_hash));
  nlohmann::json j{{"command", manifest.command},
                   {"version", manifest.version},
                   {"scenario_name", manifest.scenario_name},
                   {"scenario_hash", hash_hex},
                   {"seed", manifest.seed},
                   {"threads", manifest.threads},
                   {"stages", stages},
                   {"outputs", manifest.outputs},
                   {"status", manifest.status},
                   {"detail", manifest.detail}};
  write_text_file(path, j.dump(2) + "\n");
}

}
