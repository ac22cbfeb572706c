#include <fstream>
#include <sstream>

#include "json.hpp"
#include "mpf/eval/loso.hpp"

namespace mpf::eval {

using nlohmann::json;

namespace {

json cm_to_json(const ConfusionMatrix& cm) {
  return json{{"classes", cm.classes}, {"counts", cm.counts}};
}

ConfusionMatrix cm_from_json(const json& j) {
  ConfusionMatrix cm;
  cm.classes = j.at("classes").get<std::vector<std::string>>();
  cm.counts = j.at("counts").get<std::vector<std::vector<int64_t>>>();
  return cm;
}

void write_cm_csv(const ConfusionMatrix& cm, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::trunc);
  check(os.good(), "report: cannot write " + path.string());
  os << "true\\pred";
  for (const auto& c : cm.classes) os << "," << c;
  os << "\n";
  for (size_t r = 0; r < cm.classes.size(); ++r) {
    os << cm.classes[r];
    for (size_t c = 0; c < cm.classes.size(); ++c) os << "," << cm.counts[r][c];
    os << "\n";
  }
}

}  // namespace

void write_report(const MetricsReport& report, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir / "confusions", ec);
  check(std::filesystem::is_directory(dir), "report: cannot create " + dir.string());

  json j;
  j["classes"] = report.classes;
  j["aggregate"] = {{"confusion", cm_to_json(report.aggregate)},
                    {"acc", report.acc},
                    {"uf1", report.uf1},
                    {"uar", report.uar},
                    {"per_class_f1", report.per_class_f1},
                    {"per_class_acc_std", report.per_class_acc_std}};
  j["folds"] = json::array();
  for (const auto& f : report.folds) {
    j["folds"].push_back({{"subject", f.subject}, {"confusion", cm_to_json(f.cm)}});
    write_cm_csv(f.cm, dir / "confusions" / ("fold_" + f.subject + ".csv"));
  }
  write_cm_csv(report.aggregate, dir / "confusions" / "aggregate.csv");

  j["predictions"] = json::array();
  for (const auto& p : report.predictions)
    j["predictions"].push_back({{"clip_id", p.clip_id},
                                {"subject", p.subject},
                                {"true", report.classes[p.true_cls]},
                                {"pred", report.classes[p.pred_cls]},
                                {"probs", p.probs}});
  std::ofstream os(dir / "report.json");
  check(os.good(), "report: cannot write report.json under " + dir.string());
  os << j.dump(2) << "\n";

  // raw prediction log for oracle recomputation
  std::ofstream ps(dir / "predictions.csv", std::ios::trunc);
  ps << "clip_id,subject,true,pred";
  for (const auto& c : report.classes) ps << ",p_" << c;
  ps << "\n";
  for (const auto& p : report.predictions) {
    ps << p.clip_id << "," << p.subject << "," << report.classes[p.true_cls] << ","
       << report.classes[p.pred_cls];
    for (double v : p.probs) ps << "," << v;
    ps << "\n";
  }
}

MetricsReport read_report(const std::filesystem::path& dir) {
  std::ifstream is(dir / "report.json");
  check(is.good(), "read_report: missing report.json in " + dir.string());
  json j = json::parse(is);
  MetricsReport r;
  r.classes = j.at("classes").get<std::vector<std::string>>();
  for (const auto& jf : j.at("folds")) {
    FoldReport f;
    f.subject = jf.at("subject").get<std::string>();
    f.cm = cm_from_json(jf.at("confusion"));
    r.folds.push_back(std::move(f));
  }
  auto cls_index = [&](const std::string& name) {
    for (size_t i = 0; i < r.classes.size(); ++i)
      if (r.classes[i] == name) return static_cast<int>(i);
    fail("read_report: unknown class " + name);
  };
  for (const auto& jp : j.at("predictions")) {
    Prediction p;
    p.clip_id = jp.at("clip_id").get<std::string>();
    p.subject = jp.at("subject").get<std::string>();
    p.true_cls = cls_index(jp.at("true").get<std::string>());
    p.pred_cls = cls_index(jp.at("pred").get<std::string>());
    p.probs = jp.at("probs").get<std::vector<double>>();
    r.predictions.push_back(std::move(p));
  }
  r.finalize();
  return r;
}

void write_sweep_table(const std::vector<SweepRow>& rows, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::trunc);
  check(os.good(), "sweep: cannot write " + path.string());
  os << "value,acc,uf1,uar\n";
  for (const auto& r : rows)
    os << r.value << "," << r.acc << "," << r.uf1 << "," << r.uar << "\n";
}

std::string render_report_text(const MetricsReport& report) {
  std::ostringstream os;
  os << "LOSO evaluation over " << report.folds.size() << " folds\n";
  os << "  acc " << report.acc << "  UF1 " << report.uf1 << "  UAR " << report.uar
     << "  per-class acc std " << report.per_class_acc_std << "\n";
  os << "aggregate confusion (rows = true):\n";
  os << "            ";
  for (const auto& c : report.classes) os << c.substr(0, 10) << "  ";
  os << "\n";
  for (size_t r = 0; r < report.classes.size(); ++r) {
    os << "  " << report.classes[r].substr(0, 10) << ": ";
    for (size_t c = 0; c < report.classes.size(); ++c)
      os << report.aggregate.counts[r][c] << "  ";
    os << "\n";
  }
  for (const auto& f : report.folds) {
    const auto [uf1, uar] = uf1_uar(f.cm);
    os << "  fold " << f.subject << ": n=" << f.cm.total() << " acc " << accuracy(f.cm)
       << " UF1 " << uf1 << " UAR " << uar << "\n";
  }
  return os.str();
}

}  // namespace mpf::eval
