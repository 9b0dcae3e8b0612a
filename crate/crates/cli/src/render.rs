use serde_json::Value;

/// Plain text for a JSON scalar; compound values are printed compactly.
pub fn cell(v: &Value) -> String {
    match v {
        Value::Null => "-".into(),
        Value::String(s) => s.clone(),
        Value::Number(n) => match n.as_f64() {
            Some(f) if n.is_f64() => trim_float(f),
            _ => n.to_string(),
        },
        Value::Array(items) => items.iter().map(cell).collect::<Vec<_>>().join(","),
        other => other.to_string(),
    }
}

fn trim_float(f: f64) -> String {
    let s = format!("{f:.3}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s.is_empty() || s == "-" {
        "0".into()
    } else {
        s.to_string()
    }
}

pub fn table(headers: &[&str], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = headers.iter().map(|h| h.len()).collect();
    for row in rows {
        for (w, c) in widths.iter_mut().zip(row) {
            *w = (*w).max(c.chars().count());
        }
    }
    let line = |cells: &mut dyn Iterator<Item = &str>| {
        let mut out = String::new();
        for (i, (c, w)) in cells.zip(&widths).enumerate() {
            if i > 0 {
                out.push_str("  ");
            }
            out.push_str(&format!("{c:<w$}"));
        }
        out.trim_end().to_string() + "\n"
    };
    let mut out = line(&mut headers.iter().copied());
    for row in rows {
        out.push_str(&line(&mut row.iter().map(String::as_str)));
    }
    out
}

pub fn slices(list: &Value) -> String {
    let rows: Vec<Vec<String>> = list
        .as_array()
        .map(Vec::as_slice)
        .unwrap_or_default()
        .iter()
        .map(|s| {
            ["slice_id", "mode", "state", "qos_class", "gbr_mbps", "mbr_mbps", "beams", "epoch"]
                .iter()
                .map(|k| cell(&s[*k]))
                .collect()
        })
        .collect();
    table(&["SLICE", "MODE", "STATE", "CLASS", "GBR", "MBR", "BEAMS", "EPOCH"], &rows)
}

pub fn slice(s: &Value) -> String {
    let mut out = String::new();
    let field = |out: &mut String, k: &str, v: String| out.push_str(&format!("{k:<14}{v}\n"));
    field(&mut out, "slice_id", cell(&s["slice_id"]));
    field(&mut out, "state", cell(&s["state"]));
    field(&mut out, "qos_class", cell(&s["qos_class"]));
    let q = &s["qos"];
    field(
        &mut out,
        "qos",
        format!(
            "gbr {} Mbps, mbr {} Mbps, pdb {} ms, per {}, priority {}",
            cell(&q["gbr_mbps"]),
            cell(&q["mbr_mbps"]),
            cell(&q["pdb_ms"]),
            q["per"],
            cell(&q["priority"])
        ),
    );
    field(&mut out, "chain", cell(&s["chain"]));
    if let Some(a) = s["allocation"].as_object() {
        field(&mut out, "epoch", cell(&a["epoch"]));
        for (beam, r) in a["beams"].as_object().into_iter().flatten() {
            field(
                &mut out,
                "beam",
                format!(
                    "{beam}: fwd gbr {} mbr {}, rtn gbr {} mbr {}",
                    cell(&r["fwd"]["gbr"]),
                    cell(&r["fwd"]["mbr"]),
                    cell(&r["rtn"]["gbr"]),
                    cell(&r["rtn"]["mbr"])
                ),
            );
        }
        for (host, r) in a["hosts"].as_object().into_iter().flatten() {
            field(&mut out, "host", format!("{host}: cpu {} mem {}", cell(&r["cpu"]), cell(&r["mem"])));
        }
    }
    for p in s["stitch_points"].as_array().into_iter().flatten() {
        field(&mut out, "stitch_point", format!("{} {}", cell(&p["location"]), cell(&p["direction"])));
    }
    if let Some(rules) = s["rules"].as_array().filter(|r| !r.is_empty()) {
        out.push('\n');
        out.push_str(&rule_table(rules));
    }
    out
}

pub fn rule_table(rules: &[Value]) -> String {
    let rows: Vec<Vec<String>> = rules
        .iter()
        .map(|r| {
            vec![
                cell(&r["id"]),
                cell(&r["priority"]),
                r["match"].to_string(),
                cell(&r["slice"]),
                cell(&r["mark"]),
            ]
        })
        .collect();
    table(&["RULE", "PRIORITY", "MATCH", "SLICE", "MARK"], &rows)
}

pub fn rules(body: &Value) -> String {
    let mut out = String::from("ingress\n");
    out.push_str(&rule_table(body["ingress"]["rules"].as_array().map(Vec::as_slice).unwrap_or_default()));
    for t in body["stitch_points"].as_array().into_iter().flatten() {
        out.push_str(&format!("\n{} {}\n", cell(&t["location"]), cell(&t["direction"])));
        out.push_str(&rule_table(t["table"]["rules"].as_array().map(Vec::as_slice).unwrap_or_default()));
    }
    out
}

pub fn pool(body: &Value) -> String {
    let u = &body["utilization"];
    let beams: Vec<Vec<String>> = u["beams"]
        .as_object()
        .into_iter()
        .flatten()
        .map(|(id, b)| {
            let mut row = vec![id.clone()];
            row.extend(["fwd_gbr", "fwd_mbr", "rtn_gbr", "rtn_mbr"].iter().map(|k| cell(&b[*k])));
            row
        })
        .collect();
    let hosts: Vec<Vec<String>> = u["hosts"]
        .as_object()
        .into_iter()
        .flatten()
        .map(|(id, h)| vec![id.clone(), cell(&h["cpu"]), cell(&h["mem"])])
        .collect();
    let mut out = table(&["BEAM", "FWD_GBR", "FWD_MBR", "RTN_GBR", "RTN_MBR"], &beams);
    out.push('\n');
    out.push_str(&table(&["HOST", "CPU", "MEM"], &hosts));
    out
}

pub fn scenario(job: &Value) -> String {
    let report = &job["report"];
    let verdicts = &job["verdicts"];
    let rows: Vec<Vec<String>> = report["slices"]
        .as_object()
        .into_iter()
        .flatten()
        .map(|(id, m)| {
            let verdict = match verdicts[id]["passed"].as_bool() {
                Some(true) => "pass",
                Some(false) => "FAIL",
                None => "-",
            };
            let mut row = vec![id.clone()];
            row.extend(
                ["offered_mbps", "carried_mbps", "mean_delay_ms", "p99_delay_ms", "loss_ratio"]
                    .iter()
                    .map(|k| cell(&m[*k])),
            );
            row.push(verdict.into());
            row
        })
        .collect();
    let mut out = format!(
        "scenario {}: seed {}, {} s, propagation {} ms\n",
        cell(&job["scenario_id"]),
        cell(&report["seed"]),
        cell(&report["duration_s"]),
        cell(&report["propagation_ms"])
    );
    out.push_str(&table(&["SLICE", "OFFERED", "CARRIED", "MEAN_MS", "P99_MS", "LOSS", "VERDICT"], &rows));
    out
}
