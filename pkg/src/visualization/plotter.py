import numpy as np
import matplotlib
matplotlib.use('Agg') # Use non-interactive backend for thread safety
import matplotlib.pyplot as plt
import logging

logger = logging.getLogger(__name__)

def plot_training_curves(history, title, output_path=None):
    """
    Creates and saves the training and validation loss curves of a run.

    Args:
        history (pd.DataFrame): Metrics log with epoch, train_loss, valid_loss, valid_accuracy.
        title (str): The title of the plot.
        output_path (str, optional): Path to save the plot. If None, not saved.
    """
    missing = {'epoch', 'train_loss', 'valid_loss'} - set(history.columns)
    if missing:
        logger.error(f"Columns {sorted(missing)} for plotting not found in metrics. Available: {history.columns.tolist()}")
        return

    logger.info(f"Generating training curves: '{title}' and saving to {output_path}")

    fig, ax = plt.subplots(figsize=(12, 6))
    ax.plot(history['epoch'], history['train_loss'], color='b', label='train loss')
    ax.plot(history['epoch'], history['valid_loss'], color='darkorange', label='validation loss')
    ax.set_yscale('log')
    ax.set_title(title, fontsize=16, weight='bold')
    ax.set_xlabel('Epoch', fontsize=12)
    ax.set_ylabel('Loss', fontsize=12)
    ax.grid(True, which='both', linestyle='--', alpha=0.7)

    if 'valid_accuracy' in history.columns and history['valid_accuracy'].notna().any():
        acc_ax = ax.twinx()
        acc_ax.plot(history['epoch'], history['valid_accuracy'], color='seagreen', linestyle=':', label='validation accuracy')
        acc_ax.set_ylabel('Noise classification accuracy', fontsize=12)
        acc_ax.set_ylim(0.0, 1.0)
        acc_ax.legend(loc='upper center')
    ax.legend(loc='upper right')
    fig.tight_layout()

    if output_path:
        try:
            fig.savefig(output_path)
            logger.info(f"Plot saved successfully to {output_path}")
        except Exception as e:
            logger.error(f"Error saving plot to {output_path}: {e}", exc_info=True)

    plt.close(fig)

def plot_spectrogram_comparison(noisy, enhanced, title, output_path=None):
    """
    Side-by-side encoder spectrograms (T x N) of the noisy input and the masked output.
    """
    logger.info(f"Generating spectrogram comparison: '{title}' and saving to {output_path}")

    fig, axes = plt.subplots(1, 2, figsize=(12, 5), sharey=True)
    magnitudes = [np.abs(np.asarray(noisy)), np.abs(np.asarray(enhanced))]
    vmax = max(float(m.max()) for m in magnitudes) or 1.0
    for ax, magnitude, label in zip(axes, magnitudes, ['Noisy (w)', 'Enhanced (y)']):
        image = ax.imshow(magnitude.T, origin='lower', aspect='auto', cmap='magma', vmin=0.0, vmax=vmax)
        ax.set_title(label, fontsize=12)
        ax.set_xlabel('Frame', fontsize=12)
    axes[0].set_ylabel('Encoder basis', fontsize=12)
    fig.colorbar(image, ax=axes.tolist(), shrink=0.8)
    fig.suptitle(title, fontsize=16, weight='bold')

    if output_path:
        try:
            fig.savefig(output_path)
            logger.info(f"Plot saved successfully to {output_path}")
        except Exception as e:
            logger.error(f"Error saving plot to {output_path}: {e}", exc_info=True)

    plt.close(fig)

# Mean test SI-SDR per window for each variant, the layout of the ablation table.
def plot_ablation(table, variants, output_path=None):
    fig, ax = plt.subplots(figsize=(10, 6))
    for variant in variants:
        if variant in table.columns:
            ax.plot(table['window'], table[variant], marker='o', label=variant)
    ax.set_title('Mean test SI-SDR by attention window', fontsize=16, weight='bold')
    ax.set_xlabel('Window w (frames)', fontsize=12)
    ax.set_ylabel('SI-SDR (dB)', fontsize=12)
    ax.grid(axis='y', linestyle='--', alpha=0.7)
    ax.legend()
    fig.tight_layout()
    if output_path: fig.savefig(output_path)
    plt.close(fig)
