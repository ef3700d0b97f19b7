import pandas as pd
import logging
from datetime import datetime
import os

logger = logging.getLogger(__name__)

def _get_html_template(title, config, table_html, plot_paths, notes):
    """Generates the full HTML content for the report with inline CSS."""

    # --- Inline CSS ---
    css_style = """
    body { font-family: Arial, sans-serif; margin: 40px; background-color: #f4f4f9; color: #333; }
    .container { max-width: 1000px; margin: auto; background: white; padding: 30px; border-radius: 8px; box-shadow: 0 0 15px rgba(0,0,0,0.1); }
    h1, h2 { color: #2c3e50; border-bottom: 2px solid #3498db; padding-bottom: 10px; }
    h1 { text-align: center; }
    .section { margin-bottom: 30px; }
    pre { background: #eee; padding: 15px; border-radius: 5px; white-space: pre-wrap; word-wrap: break-word; }
    table { border-collapse: collapse; width: 100%; margin-top: 20px; }
    th, td { border: 1px solid #ddd; padding: 10px; text-align: left; }
    th { background-color: #3498db; color: white; }
    tr:nth-child(even) { background-color: #f2f2f2; }
    .plot-image { max-width: 100%; height: auto; border: 1px solid #ddd; border-radius: 5px; margin-top: 10px; }
    .warning { color: #c0392b; font-weight: bold; }
    .footer { text-align: center; margin-top: 40px; font-size: 0.8em; color: #777; }
    """

    # --- Config Sections ---
    config_html = ""
    for section, values in (config or {}).items():
        if isinstance(values, dict):
            items = "".join([f"<li><b>{k.replace('_', ' ')}:</b> {v}</li>" for k, v in values.items()])
            config_html += f"<h3>{section.title()}</h3><ul>{items}</ul>"
        else:
            config_html += f"<p><b>{section.replace('_', ' ')}:</b> {values}</p>"

    notes_html = "".join([f"<p class='warning'>{note}</p>" for note in notes])

    # --- Plots Section ---
    plots_html = ""
    for plot_title, path in plot_paths.items():
        plots_html += f"<h3>{plot_title}</h3><img src='{path}' alt='{plot_title}' class='plot-image'>"

    # --- Main Template ---
    html = f"""
    <!DOCTYPE html>
    <html lang="en">
    <head>
        <meta charset="UTF-8">
        <title>{title}</title>
        <style>{css_style}</style>
    </head>
    <body>
        <div class="container">
            <h1>{title}</h1>
            <p class="footer">Generated on: {datetime.now().strftime('%Y-%m-%d %H:%M:%S')}</p>

            <div class="section">
                <h2>Results</h2>
                {notes_html}
                {table_html}
            </div>

            <div class="section">
                <h2>Figures</h2>
                {plots_html or '<p>No figures were generated for this run.</p>'}
            </div>

            <div class="section">
                <h2>Run Configuration</h2>
                {config_html}
            </div>

            <p class="footer">End of Report</p>
        </div>
    </body>
    </html>
    """
    return html

def save_html_report(title, config, table, plot_paths, output_path, notes=()):
    """
    Writes an HTML page with a results table, figures and the run configuration.

    Args:
        title (str): Page heading.
        config (dict): The resolved run configuration, by section.
        table (pd.DataFrame): The results table.
        plot_paths (dict): Figure titles to PNG paths relative to the report.
        output_path (str): The path to save the HTML report.
        notes (iterable of str): Highlighted remarks, e.g. ordering deviations.
    """
    logger.info(f"Generating HTML report at {output_path}")
    try:
        table_html = table.to_html(index=False, classes='results-table', float_format=lambda v: f'{v:.3f}',
                                   na_rep='-')
        html_content = _get_html_template(title, config, table_html, plot_paths, list(notes))
        with open(output_path, 'w') as f:
            f.write(html_content)
        logger.info(f"HTML report saved successfully to {output_path}")

    except Exception as e:
        logger.error(f"Failed to generate HTML report: {e}", exc_info=True)


def save_output(df, output_path):
    """Saves a DataFrame as CSV; floats are written with full precision."""
    df.to_csv(output_path, index=False, lineterminator='\n', na_rep='nan')
    logger.info(f"CSV data saved successfully to {output_path}")


def save_text_table(df, output_path):
    """Fixed-width text rendering of a table, for reading in a terminal."""
    with open(output_path, 'w') as f:
        f.write(df.to_string(index=False, float_format=lambda v: f'{v:.3f}', na_rep='-') + '\n')
    logger.info(f"Text table saved successfully to {output_path}")


def save_eval_report(report, output_dir, config=None, plot_paths=None):
    """
    Writes report.txt, report.csv, per_utterance.csv and report.html into output_dir.

    Returns the paths written, keyed by kind.
    """
    os.makedirs(output_dir, exist_ok=True)
    paths = {
        'text': os.path.join(output_dir, 'report.txt'),
        'csv': os.path.join(output_dir, 'report.csv'),
        'per_utterance': os.path.join(output_dir, 'per_utterance.csv'),
        'html': os.path.join(output_dir, 'report.html'),
    }
    save_text_table(report.table, paths['text'])
    save_output(report.table, paths['csv'])
    save_output(report.per_utterance, paths['per_utterance'])
    save_html_report('Speech Enhancement Evaluation', config, report.table, plot_paths or {}, paths['html'])
    return paths


def save_ablation_report(table, output_dir, config=None, notes=()):
    """Writes ablation.txt, ablation.csv and ablation.html for a window x variant table."""
    os.makedirs(output_dir, exist_ok=True)
    paths = {
        'text': os.path.join(output_dir, 'ablation.txt'),
        'csv': os.path.join(output_dir, 'ablation.csv'),
        'html': os.path.join(output_dir, 'ablation.html'),
    }
    save_text_table(table, paths['text'])
    save_output(table, paths['csv'])
    save_html_report('Variant and Window Comparison', config, table, {}, paths['html'], notes)
    return paths
