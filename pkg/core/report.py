from typing import Any, Dict
import json


class ReportGenerator:
    """Render an estimate report (``stgof-report/1`` dict) as JSON or Markdown"""

    def __init__(self):
        self.template_markdown = """# Number of communities

**Input:** {input}
**Method:** {mode}
**Nodes / edges:** {n} / {edges}{restriction}
**alpha:** {alpha} (z_alpha = {z_alpha:.6f})
**k_max:** {k_max}
**Seed:** {seed}

## Result
{result}

## Steps
| m | psi | Q_n | B_n | C_n | decision |
|---|-----|-----|-----|-----|----------|
{steps_section}
"""

    @staticmethod
    def _number(value, spec: str = ".4f") -> str:
        return "-" if value is None else format(value, spec)

    def generate_markdown_report(self, report: Dict[str, Any]) -> str:
        if report["k_hat"] is not None and report["terminated_by"] == "acceptance":
            result = f"K_hat = **{report['k_hat']}** (first accepted step)"
        elif report["k_hat"] is not None:
            result = (f"No step up to k_max was accepted; K_hat = **{report['k_hat']}** "
                      "by the argmin fallback")
        else:
            result = (f"No step up to k_max was accepted "
                      f"(smallest psi at m = {report['argmin_suggestion']})")

        rows = []
        for step in report["steps"]:
            decision = step["decision"]
            if step.get("reason"):
                decision += f": {step['reason']}"
            rows.append(
                f"| {step['m']} | {self._number(step['psi'])} | {self._number(step['Q'], '.6g')} "
                f"| {self._number(step['B'], '.6g')} | {self._number(step['C'], 'd')} "
                f"| {decision} |"
            )

        restriction = ""
        if report["restricted_to_giant_component"]:
            restriction = f" (largest component; {report['dropped_nodes']} nodes dropped)"
        return self.template_markdown.format(
            input=report.get("input") or "-",
            mode=report["mode"],
            n=report["n"],
            edges=report["edges"],
            restriction=restriction,
            alpha=report["alpha"],
            z_alpha=report["z_alpha"],
            k_max=report["k_max"],
            seed=report["seed"],
            result=result,
            steps_section="\n".join(rows),
        )

    def generate_json_report(self, report: Dict[str, Any]) -> str:
        return json.dumps(report, indent=2, sort_keys=False) + "\n"

    def generate(self, report: Dict[str, Any], format_type: str = "json") -> str:
        """Render ``report`` in the requested format"""
        format_type = format_type.lower()

        if format_type == "json":
            return self.generate_json_report(report)
        elif format_type == "markdown":
            return self.generate_markdown_report(report)
        else:
            raise ValueError(f"Unsupported format: {format_type}")
