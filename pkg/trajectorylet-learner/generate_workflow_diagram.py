#!/usr/bin/env python3
"""Generate the Mermaid diagram of the learning workflow."""

import sys
from pathlib import Path

# Add src to path
script_dir = Path(__file__).parent
sys.path.insert(0, str(script_dir))

from src.workflow import create_workflow


def main():
    """Generate and save workflow diagram."""

    try:
        print("Creating trajectorylet learning workflow...")
        app = create_workflow()

        mermaid_code = app.get_graph().draw_mermaid(wrap_label_n_words=9)
        mermaid_path = script_dir / "trajectorylet_workflow.mmd"
        mermaid_path.write_text(mermaid_code, encoding="utf-8")
        print(f"✅ Mermaid code saved to: {mermaid_path}")

        print("\n" + "=" * 80)
        print("TRAJECTORYLET LEARNING WORKFLOW SUMMARY")
        print("=" * 80)
        print("\n  data_loading      load + subject split")
        print("  preprocessing     size normalization, hip-centering, trajectorylets, PCA")
        print("  pool_sampling     shared pool of N trajectorylets (+ Gram matrix)")
        print("  mine_instance     PARALLEL per training instance: ESVM + discriminative ranking")
        print("  aggregate_mining  fan-in barrier")
        print("  clustering        spectral clustering into K template detectors")
        print("  encoding          max-pooled detector responses (temporal pyramid)")
        print("  classification    C_reg cross-validation + one-vs-all linear SVMs")
        print("  evaluation        test split report")
        print("  finalize          model bundle + report files")
        return 0

    except Exception as e:
        print(f"❌ Error generating diagram: {e}")
        import traceback
        traceback.print_exc()
        return 1


if __name__ == "__main__":
    sys.exit(main())
