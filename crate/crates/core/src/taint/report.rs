use std::fmt::Write;

use super::{LeakKind, VulnReport};

/// Framework method through which a text widget leaks.
pub const LEAK_SET_TEXT: &str = "android.widget.TextView.setText()";
/// Channel through which a provider's result reaches its IPC caller.
pub const LEAK_PROVIDER: &str = "android.content.ContentProvider.query()";

fn input_name(widget: &str) -> String {
    if widget.starts_with("provider:") {
        widget.to_string()
    } else {
        format!("R.id.{widget}")
    }
}

/// Human-readable report in the detection-report layout.
pub fn render_text(r: &VulnReport) -> String {
    let mut out = String::new();
    out.push_str("//STACK TRACE:\n");
    for (i, frame) in r.stack.iter().enumerate() {
        let _ = writeln!(out, "{}){frame}()", i + 1);
    }
    out.push_str("//APP'S INPUTS THAT CAUSE INJECTION VULNERABILITY:\n");
    for (i, input) in r.inputs.iter().enumerate() {
        let state = if input.parametric { "ON" } else { "OFF" };
        let _ = writeln!(
            out,
            "{}){}//developer sanitizer for this input is {state}",
            i + 1,
            input_name(&input.widget)
        );
    }
    out.push_str("//OBJECT THAT CAUSE LEAKAGE:\n");
    let _ = match r.leak.kind {
        LeakKind::Widget => writeln!(out, "1){}//R.id.{}", r.leak.object, r.leak.target),
        LeakKind::Provider => writeln!(
            out,
            "1){}//returned to the IPC caller of {}",
            r.leak.object, r.leak.target
        ),
    };
    out.push_str("//INPUTS OF VULNERABLE FUNCTION\n");
    let _ = writeln!(out, "1){}", r.query_template);
    out
}

/// Machine-readable report with the same content.
pub fn render_json(r: &VulnReport) -> String {
    let mut s = serde_json::to_string_pretty(r).expect("reports serialize");
    s.push('\n');
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::Driver;
    use crate::ir::InputMap;
    use crate::taint::{LeakSite, ReportInput};

    fn sample(inputs: &[&str]) -> VulnReport {
        VulnReport {
            app: "a".into(),
            sink_stmt: 2,
            sink: "rawQuery".into(),
            stack: vec![
                "android.database.sqlite.SQLiteDatabase.rawQuery".into(),
                "Main$b1.onClick".into(),
                "DriverMain.main".into(),
            ],
            inputs: inputs
                .iter()
                .map(|w| ReportInput {
                    widget: w.to_string(),
                    parametric: false,
                })
                .collect(),
            leak: LeakSite {
                stmt: 3,
                kind: LeakKind::Widget,
                target: "t1".into(),
                object: LEAK_SET_TEXT.into(),
            },
            query_template: "SELECT * FROM t WHERE a='{S0}' AND b='{S1}'".into(),
            query_concrete: "SELECT * FROM t WHERE a='' AND b=''".into(),
            ipc: false,
            confirmed: false,
            driver: Driver::click("Main", "b1"),
            witness: InputMap::new(),
        }
    }

    #[test]
    fn two_inputs_listed_in_order() {
        let text = render_text(&sample(&["e1", "e2"]));
        assert!(text.contains(
            "1)R.id.e1//developer sanitizer for this input is OFF\n\
             2)R.id.e2//developer sanitizer for this input is OFF\n"
        ));
        assert!(text.starts_with("//STACK TRACE:\n1)android.database.sqlite.SQLiteDatabase.rawQuery()\n"));
    }

    #[test]
    fn json_round_trips_and_is_stable() {
        let r = sample(&["e1"]);
        let a = render_json(&r);
        assert_eq!(a, render_json(&r));
        let back: VulnReport = serde_json::from_str(&a).unwrap();
        assert_eq!(back, r);
        let keys: Vec<&str> = a
            .lines()
            .filter(|l| l.starts_with("  \""))
            .map(|l| l.trim().split('"').nth(1).unwrap())
            .collect();
        assert_eq!(&keys[..6], &["app", "sink_stmt", "sink", "stack", "inputs", "leak"]);
    }
}
