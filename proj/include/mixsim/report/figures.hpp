#pragma once

// Trace and clustering figures: port breakdown, payload-size histograms,
// per-packet entropy and the elbow curve, each as a CSV table plus an SVG.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "mixsim/error.hpp"
#include "mixsim/learn/kmeans.hpp"
#include "mixsim/report/csv.hpp"
#include "mixsim/report/svg.hpp"
#include "mixsim/trace/jsonl.hpp"
#include "mixsim/trace/summary.hpp"

namespace mixsim::report {

namespace fs = std::filesystem;

/// Writes `text` to `path` in binary mode, creating parent directories.
inline void write_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(Errc::MissingInput, "cannot write " + path.string());
  out << text;
}

inline std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(Errc::MissingInput, "cannot read " + path.string());
  return std::string(std::istreambuf_iterator<char>(in), {});
}

// ports.csv: protocol,dst_port,packets
inline Table port_table(const trace::SummaryStats& s) {
  Table t{{"protocol", "dst_port", "packets"}, {}};
  for (const auto& [key, n] : s.port_counts) {
    t.add({std::string(trace::to_string(key.first)), std::to_string(key.second), std::to_string(n)});
  }
  return t;
}

inline BarChart port_chart(const trace::SummaryStats& s, std::size_t top = 20) {
  std::vector<std::pair<std::pair<trace::Protocol, std::uint16_t>, std::size_t>> v(s.port_counts.begin(),
                                                                                    s.port_counts.end());
  std::stable_sort(v.begin(), v.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  if (v.size() > top) v.resize(top);
  BarChart b{"Packets per destination port", "protocol/port", "packets", {}};
  for (const auto& [key, n] : v) {
    b.bars.push_back({std::string(trace::to_string(key.first)) + "/" + std::to_string(key.second),
                      static_cast<double>(n)});
  }
  return b;
}

// sizes.csv: protocol,rank,payload_size,packets
inline Table size_table(const trace::SummaryStats& s) {
  Table t{{"protocol", "rank", "payload_size", "packets"}, {}};
  for (const auto& [proto, top] : s.top_sizes) {
    for (std::size_t i = 0; i < top.size(); ++i) {
      t.add({std::string(trace::to_string(proto)), std::to_string(i + 1), std::to_string(top[i].first),
             std::to_string(top[i].second)});
    }
  }
  return t;
}

inline BarChart size_chart(const trace::SummaryStats& s, trace::Protocol proto) {
  BarChart b{"Most common payload sizes (" + std::string(trace::to_string(proto)) + ")", "payload bytes", "packets",
             {}};
  auto it = s.top_sizes.find(proto);
  if (it != s.top_sizes.end()) {
    for (auto [size, n] : it->second) b.bars.push_back({std::to_string(size), static_cast<double>(n)});
  }
  return b;
}

// entropy.csv: frame_num,entropy_bits
inline Table entropy_table(const trace::SummaryStats& s) {
  Table t{{"frame_num", "entropy_bits"}, {}};
  for (auto [frame, h] : s.entropy_series) t.add({std::to_string(frame), num(h)});
  return t;
}

inline XYPlot entropy_plot(const trace::SummaryStats& s) {
  XYPlot p{"Payload entropy per packet", "frame", "bits per byte", {}, {}, std::make_pair(0.0, 8.0)};
  Series dots{"packets", {}, SeriesStyle::Dots};
  for (auto [frame, h] : s.entropy_series) dots.points.emplace_back(static_cast<double>(frame), h);
  p.series.push_back(std::move(dots));
  if (s.mean_entropy) p.hlines.push_back({"mean " + num(*s.mean_entropy, 3), *s.mean_entropy});
  return p;
}

// elbow.csv: k,wcss
inline Table elbow_table(const std::vector<learn::ElbowPoint>& curve) {
  Table t{{"k", "wcss"}, {}};
  for (const auto& p : curve) t.add({std::to_string(p.k), num(p.wcss)});
  return t;
}

inline XYPlot elbow_plot(const std::vector<learn::ElbowPoint>& curve, const std::string& title) {
  XYPlot p{title, "k", "WCSS", {}, {}, std::nullopt};
  Series line{"WCSS", {}, SeriesStyle::Line};
  for (const auto& e : curve) line.points.emplace_back(static_cast<double>(e.k), e.wcss);
  p.series.push_back(std::move(line));
  return p;
}

/// Writes ports, sizes and entropy figures for `trace` into `dir`; returns
/// the file names written.
inline std::vector<std::string> report_trace(const trace::Trace& trace, const fs::path& dir) {
  const auto s = trace::summarize(trace);
  std::vector<std::string> written;
  const auto put = [&](const std::string& name, const std::string& text) {
    write_file(dir / name, text);
    written.push_back(name);
  };
  put("ports.csv", to_csv(port_table(s)));
  put("ports.svg", render(port_chart(s)));
  put("sizes.csv", to_csv(size_table(s)));
  put("sizes_tcp.svg", render(size_chart(s, trace::Protocol::TCP)));
  put("sizes_udp.svg", render(size_chart(s, trace::Protocol::UDP)));
  put("entropy.csv", to_csv(entropy_table(s)));
  put("entropy.svg", render(entropy_plot(s)));
  return written;
}

inline std::vector<learn::ElbowPoint> read_elbow_csv(const std::string& text) {
  std::vector<learn::ElbowPoint> out;
  std::size_t pos = text.find('\n');
  while (pos != std::string::npos && pos + 1 < text.size()) {
    const std::size_t end = text.find('\n', pos + 1);
    const std::string line = text.substr(pos + 1, end == std::string::npos ? std::string::npos : end - pos - 1);
    const auto comma = line.find(',');
    if (comma == std::string::npos) fail(Errc::MalformedTrace, "bad elbow row: " + line);
    out.push_back({std::stoul(line.substr(0, comma)), std::stod(line.substr(comma + 1))});
    pos = end;
  }
  return out;
}

/// `input` is a trace (.jsonl) or a directory. In a directory every trace
/// file and every *elbow*.csv gets its figures re-rendered under `out`.
inline std::vector<std::string> report(const fs::path& input, const fs::path& out) {
  if (!fs::exists(input)) fail(Errc::MissingInput, input.string() + " does not exist");
  if (fs::is_regular_file(input)) {
    std::ifstream in(input, std::ios::binary);
    return report_trace(trace::read_jsonl(in), out);
  }
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(input)) {
    if (e.is_regular_file()) files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<std::string> written;
  for (const auto& f : files) {
    const std::string name = f.filename().string();
    if (f.extension() == ".jsonl") {
      std::ifstream in(f, std::ios::binary);
      for (const auto& w : report_trace(trace::read_jsonl(in), out / f.stem())) {
        written.push_back((fs::path(f.stem()) / w).string());
      }
    } else if (f.extension() == ".csv" && name.find("elbow") != std::string::npos) {
      const std::string svg = f.stem().string() + ".svg";
      write_file(out / svg, render(elbow_plot(read_elbow_csv(read_file(f)), "Elbow curve")));
      written.push_back(svg);
    }
  }
  if (written.empty()) fail(Errc::MissingInput, "no traces or elbow tables in " + input.string());
  return written;
}

}  // namespace mixsim::report
