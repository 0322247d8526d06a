"""Plot hermite-lab CSV output. Usage: python plot_experiments.py run.csv [out.png]"""

import sys

import matplotlib.pyplot as plt
import pandas as pd

LOGLOG = {
    "trace-decay": ("k", "eigenvalue k", "weighted trace norm"),
    "delta-scaling": ("delta", "delta", "max ratio"),
    "convergence": ("sup_abs_x_le_2", "R", "sup over |x| <= 2"),
    "theorem-ratio": ("band", "band", "max ratio"),
}


def main(path, out=None):
    df = pd.read_csv(path, comment="#")
    exp = df["experiment"].iloc[0]
    if exp not in LOGLOG:
        print(df.to_string(index=False))
        return
    name, xlabel, ylabel = LOGLOG[exp]
    rows = df[df["param_name"] == name]
    fig, ax = plt.subplots()
    ax.loglog(rows["param"], rows["value"], "o-")
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    fit = df[df["param_name"] == "slope"]
    title = f"{exp}, n={df['n'].iloc[0]}"
    if not fit.empty:
        title += f", slope {fit['value'].iloc[0]:.3f}"
    ax.set_title(title)
    if out:
        fig.savefig(out, dpi=120)
    else:
        plt.show()


if __name__ == "__main__":
    main(*sys.argv[1:3])
